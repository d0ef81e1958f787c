//! Ground truth for the normal linear model `Y = lambda + gamma X + U`.
//!
//! Two independent routes: the closed forms for jointly normal `(X, U)`, and
//! a brute-force finite difference of simulated quantiles under the actual
//! location-scale intervention.

use gauss_quad::GaussHermite;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::effects::PolicySpec;
use crate::error::{Error, Result};
use crate::numerics::{mean_sd, normal_pdf, normal_quantile, sample_quantile};
use crate::rng::{stream, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateDist {
    #[default]
    Normal,
    /// `mu_x + sigma_x (E - 1)` with `E ~ Exp(1)`: same mean and variance as
    /// the normal case, but skewed.
    ShiftedExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalLinearDgp {
    pub lambda: f64,
    pub gamma: f64,
    pub mu_x: f64,
    pub sigma_x: f64,
    pub sigma_u: f64,
    #[serde(default)]
    pub covariate: CovariateDist,
}

impl NormalLinearDgp {
    pub fn new(lambda: f64, gamma: f64, mu_x: f64, sigma_x: f64, sigma_u: f64) -> Result<Self> {
        let dgp = Self {
            lambda,
            gamma,
            mu_x,
            sigma_x,
            sigma_u,
            covariate: CovariateDist::Normal,
        };
        dgp.validate()?;
        Ok(dgp)
    }

    /// The simulation design: `lambda = 0`, `sigma_u = 1`.
    pub fn standard(gamma: f64, mu_x: f64, sigma_x: f64) -> Self {
        Self {
            lambda: 0.0,
            gamma,
            mu_x,
            sigma_x,
            sigma_u: 1.0,
            covariate: CovariateDist::Normal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.gamma, self.mu_x, self.sigma_x, self.sigma_u]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.sigma_x > 0.0) || !(self.sigma_u > 0.0) {
            return Err(Error::InvalidArgument(
                "dgp needs finite parameters and positive standard deviations".into(),
            ));
        }
        Ok(())
    }

    pub fn r_squared(&self) -> f64 {
        let sx = self.gamma * self.gamma * self.sigma_x * self.sigma_x;
        sx / (sx + self.sigma_u * self.sigma_u)
    }

    /// Standard deviation of `Y` (normal covariate).
    pub fn sd_y(&self) -> f64 {
        (self.gamma * self.gamma * self.sigma_x * self.sigma_x + self.sigma_u * self.sigma_u).sqrt()
    }

    /// `Q_tau[Y]` for a normal covariate.
    pub fn outcome_quantile(&self, tau: f64) -> f64 {
        self.lambda + self.mu_x * self.gamma + self.sd_y() * normal_quantile(tau)
    }

    pub fn draw_x<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.covariate {
            CovariateDist::Normal => self.mu_x + self.sigma_x * rng.sample::<f64, _>(StandardNormal),
            CovariateDist::ShiftedExponential => self.mu_x + self.sigma_x * (rng.sample::<f64, _>(Exp1) - 1.0),
        }
    }

    /// `(X, U)` for replication `rep`, each from its own stream.
    pub fn draw(&self, n: usize, seed: u64, rep: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rx = substream(seed, rep, stream::X);
        let mut ru = substream(seed, rep, stream::U);
        let x = (0..n).map(|_| self.draw_x(&mut rx)).collect();
        let u = (0..n)
            .map(|_| self.sigma_u * ru.sample::<f64, _>(StandardNormal))
            .collect();
        (x, u)
    }

    pub fn outcome(&self, x: f64, u: f64) -> f64 {
        self.lambda + self.gamma * x + u
    }

    /// A simulated sample with `X` as the single target and no controls.
    pub fn dataset(&self, n: usize, seed: u64, rep: u64) -> Result<Dataset> {
        let (x, u) = self.draw(n, seed, rep);
        let y = x.iter().zip(&u).map(|(&xi, &ui)| self.outcome(xi, ui)).collect();
        Dataset::new(y, vec![x], vec![])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormEffects {
    pub pi_l: f64,
    pub pi_s: f64,
    /// Absent when `s'(0) = 0` or `Q_tau[Y] = 0`.
    pub elasticity: Option<f64>,
    pub q_y: f64,
}

/// Exact effects for a normal covariate, with the scale pivot at `mu_x`.
pub fn closed_form_effects(dgp: &NormalLinearDgp, policy: &PolicySpec, tau: f64) -> Result<ClosedFormEffects> {
    dgp.validate()?;
    if dgp.covariate != CovariateDist::Normal {
        return Err(Error::Unsupported("closed form requires a normal covariate".into()));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau = {tau} not in (0, 1)")));
    }
    if (policy.mu - dgp.mu_x).abs() > 1e-12 * dgp.mu_x.abs().max(1.0) {
        return Err(Error::PivotMismatch {
            mu: policy.mu,
            mu_x: dgp.mu_x,
        });
    }
    let pi_l = policy.ldot0 * dgp.gamma;
    let pi_s = policy.sdot0 * dgp.r_squared().sqrt() * dgp.sigma_x * dgp.gamma.abs() * normal_quantile(tau);
    let q_y = dgp.outcome_quantile(tau);
    let elasticity = crate::effects::elasticity(pi_s, policy.sdot0, q_y).ok();
    Ok(ClosedFormEffects {
        pi_l,
        pi_s,
        elasticity,
        q_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceEffects {
    pub pi_l: f64,
    pub pi_s: f64,
    pub pi_l_se: f64,
    pub pi_s_se: f64,
    pub batches: usize,
}

/// Batches the simulation is split into; fixed so results do not depend on
/// the thread count.
pub const ORACLE_BATCHES: usize = 16;

/// Central finite differences of simulated quantiles under a pure location
/// shift `l(delta) = l'(0) delta` and a pure scale change
/// `s(delta) = 1 + s'(0) delta` around `policy.mu`.
///
/// The draws are shared by both sides of each difference. The point estimate
/// uses all `n_sim` draws; its Monte Carlo standard error comes from the
/// spread of the per-batch differences.
pub fn brute_force_effect(
    dgp: &NormalLinearDgp,
    policy: &PolicySpec,
    tau: f64,
    delta: f64,
    n_sim: usize,
    seed: u64,
) -> Result<BruteForceEffects> {
    dgp.validate()?;
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0, 0.1]")));
    }
    if n_sim < ORACLE_BATCHES * 100 {
        return Err(Error::InvalidArgument(format!("n_sim = {n_sim} is too small")));
    }
    let per = n_sim / ORACLE_BATCHES;
    let batches: Vec<(Vec<f64>, Vec<f64>)> = (0..ORACLE_BATCHES)
        .into_par_iter()
        .map(|b| {
            let len = if b + 1 == ORACLE_BATCHES { n_sim - per * b } else { per };
            dgp.draw(len, seed, b as u64)
        })
        .collect();

    let outcome_q = |xs: &[&[f64]], us: &[&[f64]], map: &dyn Fn(f64) -> f64| -> Result<f64> {
        let y: Vec<f64> = xs
            .iter()
            .zip(us)
            .flat_map(|(x, u)| x.iter().zip(u.iter()).map(|(&xi, &ui)| dgp.outcome(map(xi), ui)))
            .collect();
        sample_quantile(&y, tau)
    };
    let mu = policy.mu;
    let (ld, sd) = (policy.ldot0, policy.sdot0);
    let fd = |xs: &[&[f64]], us: &[&[f64]]| -> Result<(f64, f64)> {
        let loc = (outcome_q(xs, us, &|x| x + ld * delta)? - outcome_q(xs, us, &|x| x - ld * delta)?) / (2.0 * delta);
        let scale = (outcome_q(xs, us, &|x| (x - mu) * (1.0 + sd * delta) + mu)?
            - outcome_q(xs, us, &|x| (x - mu) * (1.0 - sd * delta) + mu)?)
            / (2.0 * delta);
        Ok((loc, scale))
    };

    let per_batch: Vec<(f64, f64)> = batches
        .par_iter()
        .map(|(x, u)| fd(&[x.as_slice()], &[u.as_slice()]))
        .collect::<Result<_>>()?;
    let xs: Vec<&[f64]> = batches.iter().map(|(x, _)| x.as_slice()).collect();
    let us: Vec<&[f64]> = batches.iter().map(|(_, u)| u.as_slice()).collect();
    let (pi_l, pi_s) = fd(&xs, &us)?;

    let b = ORACLE_BATCHES as f64;
    let loc: Vec<f64> = per_batch.iter().map(|p| p.0).collect();
    let scale: Vec<f64> = per_batch.iter().map(|p| p.1).collect();
    let (_, loc_sd) = mean_sd(&loc);
    let (_, scale_sd) = mean_sd(&scale);
    Ok(BruteForceEffects {
        pi_l,
        pi_s,
        pi_l_se: loc_sd / b.sqrt(),
        pi_s_se: scale_sd / b.sqrt(),
        batches: ORACLE_BATCHES,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteinCheck {
    /// `E[m(X)(X - mu_x)]`
    pub lhs: f64,
    /// `sigma_x^2 E[m'(X)]`
    pub rhs: f64,
    pub residual: f64,
}

/// Checks Stein's identity `E[m(X)(X - mu)] = sigma^2 E[m'(X)]` for
/// `m(x) = dS_{Y|X}(Q_tau[Y] | x)/dx` by Gauss-Hermite quadrature.
pub fn stein_check(dgp: &NormalLinearDgp, tau: f64, n_quad: usize) -> Result<SteinCheck> {
    dgp.validate()?;
    if dgp.covariate != CovariateDist::Normal {
        return Err(Error::Unsupported("Stein's identity needs a normal covariate".into()));
    }
    let rule = GaussHermite::new(n_quad).map_err(|e| Error::QuadratureFailure(e.to_string()))?;
    let q = dgp.outcome_quantile(tau);
    let (g, su) = (dgp.gamma, dgp.sigma_u);
    let zval = |x: f64| (q - dgp.lambda - g * x) / su;
    let m = |x: f64| g / su * normal_pdf(zval(x));
    let m_prime = |x: f64| {
        let z = zval(x);
        g * g / (su * su) * z * normal_pdf(z)
    };
    // X = mu + sigma sqrt(2) t, so E[h(X)] = pi^-1/2 int e^{-t^2} h(.) dt
    let scale = dgp.sigma_x * std::f64::consts::SQRT_2;
    let norm = std::f64::consts::PI.sqrt();
    let lhs = rule.integrate(|t| {
        let x = dgp.mu_x + scale * t;
        m(x) * (x - dgp.mu_x)
    }) / norm;
    let rhs = dgp.sigma_x * dgp.sigma_x * rule.integrate(|t| m_prime(dgp.mu_x + scale * t)) / norm;
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(Error::QuadratureFailure("non-finite quadrature sum".into()));
    }
    Ok(SteinCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn policy(mu: f64) -> PolicySpec {
        PolicySpec::new(1.0, -1.0, mu).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let dgp = NormalLinearDgp::standard(1.0, 0.0, 1.0);
        let cf = closed_form_effects(&dgp, &policy(0.0), 0.9).unwrap();
        assert_abs_diff_eq!(cf.pi_s, -0.906_193_8, epsilon = 1e-6);
        assert_eq!(cf.pi_l, 1.0);
        assert_eq!(closed_form_effects(&dgp, &policy(0.0), 0.5).unwrap().pi_s, 0.0);
        for tau in [0.1, 0.3, 0.75, 0.9] {
            let e = closed_form_effects(&dgp, &policy(0.0), tau).unwrap().elasticity.unwrap();
            assert_abs_diff_eq!(e, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_rejects_bad_inputs() {
        let dgp = NormalLinearDgp::standard(1.0, 1.0, 1.0);
        assert!(matches!(
            closed_form_effects(&dgp, &policy(0.0), 0.5),
            Err(Error::PivotMismatch { .. })
        ));
        let skewed = NormalLinearDgp {
            covariate: CovariateDist::ShiftedExponential,
            ..dgp
        };
        assert!(matches!(
            closed_form_effects(&skewed, &policy(1.0), 0.5),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn closed_form_pivot_and_sign_invariance() {
        let dgp = NormalLinearDgp::new(0.3, 0.8, 1.0, 1.5, 0.7).unwrap();
        let moved = NormalLinearDgp {
            mu_x: 4.0,
            gamma: -0.8,
            ..dgp
        };
        for tau in [0.1, 0.25, 0.6, 0.9] {
            let a = closed_form_effects(&dgp, &policy(1.0), tau).unwrap();
            let b = closed_form_effects(&moved, &policy(4.0), tau).unwrap();
            assert_eq!(a.pi_s, b.pi_s);
        }
    }

    #[test]
    fn closed_form_elasticity_is_consistent() {
        let dgp = NormalLinearDgp::new(2.0, 0.6, 1.0, 1.2, 0.9).unwrap();
        let p = policy(1.0);
        for tau in [0.2, 0.5, 0.8] {
            let cf = closed_form_effects(&dgp, &p, tau).unwrap();
            let q = dgp.lambda + dgp.mu_x * dgp.gamma + dgp.sd_y() * normal_quantile(tau);
            let e = crate::effects::elasticity(cf.pi_s, p.sdot0, q).unwrap();
            assert_abs_diff_eq!(cf.elasticity.unwrap(), e, epsilon = 1e-12);
        }
    }

    #[test]
    fn stein_identity_holds() {
        let dgp = NormalLinearDgp::standard(1.0, 0.0, 1.0);
        let s = stein_check(&dgp, 0.75, 64).unwrap();
        assert!(s.residual <= 1e-8, "{s:?}");
        assert!(s.lhs.abs() > 1e-2);
        let mid = stein_check(&dgp, 0.5, 64).unwrap();
        assert!(mid.lhs.abs() < 1e-10 && mid.rhs.abs() < 1e-10 && mid.residual <= 1e-10);
        let coarse = stein_check(&dgp, 0.75, 32).unwrap();
        assert!(s.residual <= coarse.residual.max(1e-12));
    }

    #[test]
    fn brute_force_small_run() {
        let dgp = NormalLinearDgp::standard(1.0, 0.0, 1.0);
        let p = policy(0.0);
        let bf = brute_force_effect(&dgp, &p, 0.9, 0.01, 400_000, 3).unwrap();
        let cf = closed_form_effects(&dgp, &p, 0.9).unwrap();
        assert!((bf.pi_l - cf.pi_l).abs() < (4.0 * bf.pi_l_se).max(5e-3), "{bf:?}");
        assert!((bf.pi_s - cf.pi_s).abs() < (4.0 * bf.pi_s_se).max(5e-3), "{bf:?}");
        let again = brute_force_effect(&dgp, &p, 0.9, 0.01, 400_000, 3).unwrap();
        assert_eq!(bf, again);
    }

    #[test]
    fn brute_force_without_covariate_effect() {
        let dgp = NormalLinearDgp::standard(0.0, 0.0, 1.0);
        let bf = brute_force_effect(&dgp, &policy(0.0), 0.3, 0.01, 200_000, 1).unwrap();
        assert_eq!(bf.pi_l, 0.0);
        assert_eq!(bf.pi_s, 0.0);
    }

    #[test]
    fn input_validation() {
        assert!(NormalLinearDgp::new(0.0, 1.0, 0.0, 0.0, 1.0).is_err());
        let dgp = NormalLinearDgp::standard(1.0, 0.0, 1.0);
        assert!(brute_force_effect(&dgp, &policy(0.0), 0.5, 0.5, 1_000_000, 1).is_err());
    }
}
