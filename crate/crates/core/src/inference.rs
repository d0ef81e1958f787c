//! Influence-function inference for the effect estimators and the t-test of a
//! zero scale effect.
//!
//! Every estimator here has the form `f^-1 D abar(theta_hat)` where `abar` is
//! a sample mean of `a_i = g(Z_i'theta) phi_x'(X_i)' alpha * c_i`. Its
//! influence row splits into
//!
//! ```text
//! Phi_i = f^-1 D B_i - Pi * r_i
//! B_i   = (a_i - abar) - J s_i - J H_Q psi_i,      J = M H^-1
//! r_i   = (fdot / f) psi_i + f^-1 (K_h(Y_i - q) - mean K_h)
//! ```
//!
//! with `H` the expected Hessian of the average log-likelihood (negative
//! definite). `B_i` does not depend on the policy and is exactly the
//! influence row of the scale-test numerator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cdf_model::{hessian_avg, lambda_weights, score_rows};
use crate::effects::{EffectEstimate, QuantileFit, SimultaneousEstimate};
use crate::error::{Error, Result};
use crate::numerics::{normal_cdf, normal_quantile, KernelSpec, LinkKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InferenceOptions {
    /// Use `1{Y_i < q}` instead of `1{Y_i <= q}` in the quantile influence
    /// function.
    pub strict_indicator: bool,
    /// Disable the logit shortcut (`Lambda = Z`) and always take the generic
    /// path. Only useful for cross-checking.
    pub generic_only: bool,
}

/// Which pair of effects the rows describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectPair {
    /// `(Pi_L, Pi_S)`
    LocationScale,
    /// `(Pi_L,1, Pi_L,2)`
    Simultaneous,
}

impl EffectPair {
    /// Labels of the two effects and of their sum.
    pub fn labels(self) -> [&'static str; 3] {
        match self {
            EffectPair::LocationScale => ["location", "scale", "total"],
            EffectPair::Simultaneous => ["location_1", "location_2", "compensated"],
        }
    }
}

#[derive(Debug, Clone)]
pub struct InfluenceComponents {
    pub pair: EffectPair,
    pub n: usize,
    /// Jacobian of `abar` in `theta`, `2 x d_Z`.
    pub m_hat: DMatrix<f64>,
    /// Information-form Hessian `n^-1 sum g^2/(G(1-G)) Z Z'` (positive
    /// definite); the Hessian itself is its negative.
    pub h_hat: DMatrix<f64>,
    pub hq_hat: DVector<f64>,
    /// `D_mu` or `D_L`.
    pub d: DMatrix<f64>,
    pub fdot_hat: f64,
    pub f_hat: f64,
    /// The point estimates the rows belong to.
    pub estimates: [f64; 2],
    /// `a_i`, `n x 2`.
    pub numerator_rows: DMatrix<f64>,
    /// Policy-free building block `B_i`, `n x 2`.
    pub base_rows: DMatrix<f64>,
    /// Density-estimation part `r_i`.
    pub density_rows: Vec<f64>,
    pub psi_rows: Vec<f64>,
    /// `Phi_i`, `n x 2`.
    pub phi_rows: DMatrix<f64>,
}

impl InfluenceComponents {
    /// `sqrt(n^-2 sum_i (l' Phi_i)^2)`.
    pub fn standard_error(&self, l: [f64; 2]) -> f64 {
        let ss: f64 = (0..self.n)
            .map(|i| {
                let v = l[0] * self.phi_rows[(i, 0)] + l[1] * self.phi_rows[(i, 1)];
                v * v
            })
            .sum();
        ss.sqrt() / self.n as f64
    }

    pub fn column_means(&self) -> [f64; 2] {
        let n = self.n as f64;
        [self.phi_rows.column(0).sum() / n, self.phi_rows.column(1).sum() / n]
    }
}

/// Derivative of the kernel density estimate,
/// `n^-1 sum_i h^-2 K'((point - y_i) / h)`.
pub fn density_derivative_at(y: &[f64], point: f64, kernel: &KernelSpec) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    let h = kernel.bandwidth();
    let sum: f64 = y.iter().map(|&yi| kernel.kernel_derivative((point - yi) / h)).sum();
    Ok(sum / (h * h * y.len() as f64))
}

/// One component `a_i,r = g_i * (d phi/d x_t)' alpha * c_i,r`.
struct Numerator<'a> {
    target: usize,
    multiplier: Option<&'a [f64]>,
}

fn matrix2(d: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[d[0][0], d[0][1], d[1][0], d[1][1]])
}

fn build(
    fit: &QuantileFit,
    pair: EffectPair,
    numerators: [Numerator<'_>; 2],
    d: DMatrix<f64>,
    estimates: [f64; 2],
    opts: &InferenceOptions,
) -> Result<InfluenceComponents> {
    let design = &fit.design;
    let z = &design.z;
    let n = fit.n();
    let nf = n as f64;
    let dz = design.dim();
    let model = &fit.model;
    let lvs = model.link_values(z);

    // a_i and M = M1 + (M2, O)
    let mut a = DMatrix::zeros(n, 2);
    let mut m = DMatrix::zeros(2, dz);
    for (r, num) in numerators.iter().enumerate() {
        let da = design.dphi_alpha(num.target, &model.theta);
        let dphi = &design.dphi[num.target];
        for i in 0..n {
            let c = num.multiplier.map_or(1.0, |mult| mult[i]);
            a[(i, r)] = lvs[i].pdf * da[i] * c;
            let w1 = lvs[i].pdf_derivative * da[i] * c;
            let w2 = lvs[i].pdf * c;
            for k in 0..dz {
                m[(r, k)] += w1 * z[(i, k)];
            }
            for k in 0..design.d_phi_x {
                m[(r, k)] += w2 * dphi[(i, k)];
            }
        }
    }
    m /= nf;

    let shortcut = model.link == LinkKind::Logit && !opts.generic_only;
    let h_hat = hessian_avg(model, z)?;
    let (scores, lambda) = if shortcut {
        let mut s = z.clone();
        for i in 0..n {
            s.row_mut(i).scale_mut(fit.indicator[i] - lvs[i].cdf);
        }
        (s, z.clone())
    } else {
        (score_rows(model, &fit.indicator, z)?, lambda_weights(model, z)?)
    };

    let kvals: Vec<f64> = fit.y.iter().map(|&yi| fit.kernel.scaled(yi - fit.q_hat)).collect();
    let kbar = kvals.iter().sum::<f64>() / nf;
    let hq = lambda.tr_mul(&DVector::from_column_slice(&kvals)) / nf;

    // J = M H^-1 with H = -h_hat
    let chol = h_hat.clone().cholesky().ok_or(Error::SingularHessian)?;
    let j = -chol.solve(&m.transpose()).transpose();

    let f = fit.f_hat;
    let psi: Vec<f64> = fit
        .y
        .iter()
        .map(|&yi| {
            let below = if opts.strict_indicator { yi < fit.q_hat } else { yi <= fit.q_hat };
            (fit.tau - if below { 1.0 } else { 0.0 }) / f
        })
        .collect();
    let fdot = density_derivative_at(&fit.y, fit.q_hat, &fit.kernel)?;

    let abar = [a.column(0).sum() / nf, a.column(1).sum() / nf];
    let js = &scores * j.transpose(); // n x 2
    let jhq = &j * &hq; // 2
    let mut base = DMatrix::zeros(n, 2);
    for i in 0..n {
        for r in 0..2 {
            base[(i, r)] = (a[(i, r)] - abar[r]) - js[(i, r)] - jhq[r] * psi[i];
        }
    }
    let density_rows: Vec<f64> = (0..n)
        .map(|i| fdot / f * psi[i] + (kvals[i] - kbar) / f)
        .collect();

    let mut phi = &base * d.transpose() / f;
    for i in 0..n {
        for r in 0..2 {
            phi[(i, r)] -= estimates[r] * density_rows[i];
        }
    }

    Ok(InfluenceComponents {
        pair,
        n,
        m_hat: m,
        h_hat,
        hq_hat: hq,
        d,
        fdot_hat: fdot,
        f_hat: f,
        estimates,
        numerator_rows: a,
        base_rows: base,
        density_rows,
        psi_rows: psi,
        phi_rows: phi,
    })
}

/// Influence rows of `(Pi_L, Pi_S)`.
pub fn influence_rows(
    fit: &QuantileFit,
    effects: &EffectEstimate,
    opts: &InferenceOptions,
) -> Result<InfluenceComponents> {
    if fit.x.len() != 1 {
        return Err(Error::WrongTargetCount {
            expected: 1,
            found: fit.x.len(),
        });
    }
    build(
        fit,
        EffectPair::LocationScale,
        [
            Numerator { target: 0, multiplier: None },
            Numerator { target: 0, multiplier: Some(&fit.x[0]) },
        ],
        matrix2(effects.policy.d_matrix()),
        [effects.pi_l, effects.pi_s],
        opts,
    )
}

/// Influence rows of `(Pi_L,1, Pi_L,2)` for simultaneous location shifts.
pub fn simultaneous_influence_rows(
    fit: &QuantileFit,
    effects: &SimultaneousEstimate,
    opts: &InferenceOptions,
) -> Result<InfluenceComponents> {
    if fit.x.len() != 2 {
        return Err(Error::WrongTargetCount {
            expected: 2,
            found: fit.x.len(),
        });
    }
    build(
        fit,
        EffectPair::Simultaneous,
        [
            Numerator { target: 0, multiplier: None },
            Numerator { target: 1, multiplier: None },
        ],
        matrix2(effects.policy.d_matrix()),
        effects.pi_targets,
        opts,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectInterval {
    pub effect: String,
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Normal-approximation intervals for both effects and their sum.
pub fn effect_confidence_intervals(components: &InfluenceComponents, level: f64) -> Result<Vec<EffectInterval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} not in (0, 1)")));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    let [e1, e2] = components.estimates;
    let labels = components.pair.labels();
    let rows = [([1.0, 0.0], e1), ([0.0, 1.0], e2), ([1.0, 1.0], e1 + e2)];
    Ok(rows
        .iter()
        .zip(labels)
        .map(|((l, est), name)| {
            let se = components.standard_error(*l);
            EffectInterval {
                effect: name.to_string(),
                estimate: *est,
                se,
                lower: est - z * se,
                upper: est + z * se,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTestResult {
    pub gamma_hat: f64,
    pub v_hat: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// t-test of `H0: Pi_S = 0` with the scale derivative normalized to one.
/// The statistic has no density in its numerator, which is the point of
/// testing through `Gamma` rather than through `Pi_S`.
pub fn scale_effect_ttest(components: &InfluenceComponents, mu: f64) -> Result<ScaleTestResult> {
    if components.pair != EffectPair::LocationScale {
        return Err(Error::InvalidArgument("scale test needs location-scale rows".into()));
    }
    let n = components.n as f64;
    let a = &components.numerator_rows;
    let gamma_hat = (mu * a.column(0).sum() - a.column(1).sum()) / n;
    let b = &components.base_rows;
    let v_hat = (0..components.n)
        .map(|i| {
            let v = mu * b[(i, 0)] - b[(i, 1)];
            v * v
        })
        .sum::<f64>()
        / n;
    if !(v_hat > 0.0) {
        return Err(Error::ZeroVariance(v_hat));
    }
    let t_stat = n.sqrt() * gamma_hat / v_hat.sqrt();
    let p_value = 2.0 * normal_cdf(-t_stat.abs());
    Ok(ScaleTestResult {
        gamma_hat,
        v_hat,
        t_stat,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::effects::{
        estimate_location_scale, estimate_simultaneous, location_scale_from_fit, with_theta, EstimationSettings,
        PolicySpec, SimultaneousPolicy,
    };
    use crate::numerics::kde_at;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sample(n: usize, seed: u64, gamma: f64, with_control: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| {
                gamma * xi + if with_control { 0.5 * wi } else { 0.0 } + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let controls = if with_control { vec![w] } else { vec![] };
        Dataset::new(y, vec![x], controls).unwrap()
    }

    fn setup(link: LinkKind, policy: PolicySpec, tau: f64) -> (EffectEstimate, QuantileFit) {
        let ds = sample(800, 17, 1.0, true);
        estimate_location_scale(&ds, &policy, tau, &EstimationSettings::new(link)).unwrap()
    }

    #[test]
    fn density_derivative_examples() {
        let k = KernelSpec::gaussian(0.7).unwrap();
        assert_abs_diff_eq!(density_derivative_at(&[-1.3, 1.3], 0.0, &k).unwrap(), 0.0, epsilon = 1e-15);
        let h = 0.7;
        let want = -crate::numerics::normal_pdf(1.0) / (h * h);
        assert_abs_diff_eq!(density_derivative_at(&[0.0], h, &k).unwrap(), want, epsilon = 1e-15);
        assert!(density_derivative_at(&[], 0.0, &k).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..200_000).map(|_| rng.sample(StandardNormal)).collect();
        let k = KernelSpec::gaussian_auto(&y).unwrap();
        let d = density_derivative_at(&y, 1.0, &k).unwrap();
        // sampling sd of the derivative estimate: sqrt(f(1) int K'^2 / (n h^3))
        let h = k.bandwidth();
        let sd = (0.24197 / (4.0 * std::f64::consts::PI.sqrt()) / (2e5 * h.powi(3))).sqrt();
        assert!((d + 0.24197).abs() < 3.0 * sd, "{d} (sd {sd})");
    }

    #[test]
    fn density_derivative_matches_kde_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = (0..300).map(|_| rng.sample(StandardNormal)).collect();
        let k = KernelSpec::gaussian(0.4).unwrap();
        let eps = 1e-5;
        let fd = (kde_at(&y, 0.3 + eps, &k).unwrap() - kde_at(&y, 0.3 - eps, &k).unwrap()) / (2.0 * eps);
        assert_abs_diff_eq!(density_derivative_at(&y, 0.3, &k).unwrap(), fd, epsilon = 1e-7);
    }

    #[test]
    fn row_means_vanish() {
        for link in LinkKind::ALL {
            let (est, fit) = setup(link, PolicySpec::new(1.0, -1.0, 0.2).unwrap(), 0.4);
            let c = influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
            let n = c.n as f64;
            let psi_mean = c.psi_rows.iter().sum::<f64>() / n;
            assert!(psi_mean.abs() <= 1.0 / (n * c.f_hat) + 1e-12);
            // a_i and K_h terms are centred, the score mean vanishes at the
            // optimum, so only the psi terms are left
            let means = c.column_means();
            for r in 0..2 {
                let base_mean = c.base_rows.column(r).sum() / n;
                assert!(base_mean.abs() < 50.0 * psi_mean.abs() + 1e-6, "{link} {r}: {base_mean}");
                assert!(means[r].abs() < 50.0 * psi_mean.abs() + 1e-6, "{link} {r}: {}", means[r]);
            }
        }
    }

    #[test]
    fn rows_transform_with_pivot() {
        let p1 = PolicySpec::new(1.0, -1.0, 0.0).unwrap();
        let p2 = PolicySpec::new(1.0, -1.0, 1.5).unwrap();
        let (e1, fit) = setup(LinkKind::Probit, p1, 0.6);
        let e2 = location_scale_from_fit(&fit, &p2).unwrap();
        let opts = InferenceOptions::default();
        let c1 = influence_rows(&fit, &e1, &opts).unwrap();
        let c2 = influence_rows(&fit, &e2, &opts).unwrap();
        assert_eq!(c1.base_rows, c2.base_rows);
        let dd = (&c1.d - &c2.d) / fit.f_hat;
        for i in 0..c1.n {
            let b = c1.base_rows.row(i).transpose();
            let delta = &dd * b;
            for r in 0..2 {
                let want = delta[r] - (c1.estimates[r] - c2.estimates[r]) * c1.density_rows[i];
                assert_abs_diff_eq!(c1.phi_rows[(i, r)] - c2.phi_rows[(i, r)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for link in LinkKind::ALL {
            let (est, fit) = setup(link, PolicySpec::new(1.0, 1.0, 0.0).unwrap(), 0.3);
            let c = influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
            let d = fit.model.theta.len();
            let eps = 1e-6;
            for k in 0..d {
                let mut tp = fit.model.theta.clone();
                let mut tm = fit.model.theta.clone();
                tp[k] += eps;
                tm[k] -= eps;
                let fp = QuantileFit { model: with_theta(&fit.model, tp), ..fit.clone() };
                let fm = QuantileFit { model: with_theta(&fit.model, tm), ..fit.clone() };
                let (ap, am) = (fp.location_scale_moments(), fm.location_scale_moments());
                for r in 0..2 {
                    let fd = (ap[r] - am[r]) / (2.0 * eps);
                    assert_abs_diff_eq!(c.m_hat[(r, k)], fd, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn hq_is_density_times_nadaraya_watson() {
        let (est, fit) = setup(LinkKind::Probit, PolicySpec::new(1.0, -1.0, 0.0).unwrap(), 0.5);
        let c = influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
        let lambda = lambda_weights(&fit.model, &fit.design.z).unwrap();
        let k: Vec<f64> = fit.y.iter().map(|&y| fit.kernel.scaled(y - fit.q_hat)).collect();
        let ksum: f64 = k.iter().sum();
        for j in 0..lambda.ncols() {
            let nw = (0..fit.n()).map(|i| k[i] * lambda[(i, j)]).sum::<f64>() / ksum;
            assert_abs_diff_eq!(c.hq_hat[j], fit.f_hat * nw, epsilon = 1e-12);
        }
    }

    #[test]
    fn logit_shortcut_agrees_with_generic_path() {
        let (est, fit) = setup(LinkKind::Logit, PolicySpec::new(1.0, -1.0, 0.3).unwrap(), 0.7);
        let fast = influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
        let slow = influence_rows(&fit, &est, &InferenceOptions { generic_only: true, ..Default::default() }).unwrap();
        assert!((&fast.phi_rows - &slow.phi_rows).amax() < 1e-10);
        let tf = scale_effect_ttest(&fast, 0.3).unwrap();
        let ts = scale_effect_ttest(&slow, 0.3).unwrap();
        assert_abs_diff_eq!(tf.t_stat, ts.t_stat, epsilon = 1e-10);
    }

    #[test]
    fn standard_errors_are_continuous_in_theta() {
        let policy = PolicySpec::new(1.0, -1.0, 0.0).unwrap();
        let (est, fit) = setup(LinkKind::Probit, policy, 0.5);
        let opts = InferenceOptions::default();
        let c = influence_rows(&fit, &est, &opts).unwrap();
        let mut theta = fit.model.theta.clone();
        theta.add_scalar_mut(5e-9);
        let moved = QuantileFit { model: with_theta(&fit.model, theta), ..fit.clone() };
        let est2 = location_scale_from_fit(&moved, &policy).unwrap();
        let c2 = influence_rows(&moved, &est2, &opts).unwrap();
        for l in [[1.0, 0.0], [0.0, 1.0]] {
            let (a, b) = (c.standard_error(l), c2.standard_error(l));
            assert!(((a - b) / a).abs() < 1e-6);
        }
    }

    #[test]
    fn interval_multiplier_and_degenerate_rows() {
        let (est, fit) = setup(LinkKind::Probit, PolicySpec::new(1.0, -1.0, 0.0).unwrap(), 0.5);
        let mut c = influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
        let ci = effect_confidence_intervals(&c, 0.95).unwrap();
        assert_eq!(ci[0].effect, "location");
        assert_abs_diff_eq!((ci[1].upper - ci[1].estimate) / ci[1].se, 1.959963984540054, epsilon = 1e-9);
        c.phi_rows.fill(0.0);
        let ci = effect_confidence_intervals(&c, 0.95).unwrap();
        assert_eq!(ci[0].se, 0.0);
        assert_eq!(ci[0].lower, ci[0].upper);
        assert!(effect_confidence_intervals(&c, 1.0).is_err());
    }

    #[test]
    fn gamma_is_affine_in_pivot() {
        let (est, fit) = setup(LinkKind::Probit, PolicySpec::new(1.0, -1.0, 0.0).unwrap(), 0.5);
        let c = influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
        let g0 = scale_effect_ttest(&c, 0.0).unwrap().gamma_hat;
        let g1 = scale_effect_ttest(&c, 2.0).unwrap().gamma_hat;
        let mean_a = c.numerator_rows.column(0).sum() / c.n as f64;
        assert_abs_diff_eq!(g1 - g0, 2.0 * mean_a, epsilon = 1e-14);
        // Gamma relates to Pi_S through s'(0) and f
        let t = scale_effect_ttest(&c, 0.0).unwrap();
        assert_abs_diff_eq!(est.pi_s, -t.gamma_hat / fit.f_hat, epsilon = 1e-12);
        assert!(t.p_value >= 0.0 && t.p_value <= 1.0);
    }

    #[test]
    fn simultaneous_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 600;
        let x1: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|i| x1[i] + 2.0 * x2[i] + rng.sample::<f64, _>(StandardNormal)).collect();
        let ds = Dataset::new(y, vec![x1, x2], vec![]).unwrap();
        let policy = SimultaneousPolicy::new([1.0, -1.0]).unwrap();
        let (est, fit) = estimate_simultaneous(&ds, &policy, 0.5, &EstimationSettings::new(LinkKind::Probit)).unwrap();
        let c = simultaneous_influence_rows(&fit, &est, &InferenceOptions::default()).unwrap();
        let ci = effect_confidence_intervals(&c, 0.9).unwrap();
        assert_eq!(ci[2].effect, "compensated");
        assert_abs_diff_eq!(ci[2].estimate, est.pi_c, epsilon = 1e-15);
        assert!(ci.iter().all(|c| c.se > 0.0));
        assert!(scale_effect_ttest(&c, 0.0).is_err());
    }
}
