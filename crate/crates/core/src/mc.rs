//! Monte Carlo experiments on the normal linear design: bias/variance/MSE,
//! interval coverage, normality of studentized effects, and the size-adjusted
//! power of the scale t-test.
//!
//! Replications run in parallel but every reduction happens sequentially over
//! replications in index order, so results are bitwise identical for any
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::{fit_quantile, location_scale_from_fit, EstimationSettings, PolicySpec};
use crate::error::{Error, Result};
use crate::inference::{effect_confidence_intervals, influence_rows, scale_effect_ttest, InferenceOptions};
use crate::numerics::{normal_cdf, normal_quantile, sample_quantile, LinkKind};
use crate::oracle::{closed_form_effects, NormalLinearDgp};

/// Share of failed replications above which a cell is reported invalid.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: NormalLinearDgp,
    pub n: usize,
    pub reps: usize,
    pub taus: Vec<f64>,
    pub links: Vec<LinkKind>,
    pub policy: PolicySpec,
    pub seed: u64,
    /// Slopes for the coverage, normality and power experiments.
    pub gamma_grid: Vec<f64>,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub level: f64,
}

impl McConfig {
    /// The bias-table design: `gamma = 1`, `mu_x = 0`, unit variances,
    /// `l'(0) = 1`, `s'(0) = -1`, 2000 replications.
    pub fn table_design(n: usize) -> Self {
        Self {
            dgp: NormalLinearDgp::standard(1.0, 0.0, 1.0),
            n,
            reps: 2000,
            taus: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            links: vec![LinkKind::Probit, LinkKind::Logit],
            policy: PolicySpec {
                ldot0: 1.0,
                sdot0: -1.0,
                mu: 0.0,
            },
            seed: 20_240_601,
            gamma_grid: vec![0.25, 0.5, 0.75, 1.0],
            workers: 0,
            level: 0.95,
        }
    }

    /// The power design: `mu_x = 1`, `s'(0) = -1`, slopes from -0.4 to 0.4.
    ///
    /// The pivot stays at 0. With `mu = mu_x` the influence function of the
    /// test numerator vanishes identically at `gamma = 0` and the t-statistic
    /// is not asymptotically normal under the null.
    pub fn power_design(n: usize) -> Self {
        Self {
            dgp: NormalLinearDgp::standard(0.0, 1.0, 1.0),
            links: vec![LinkKind::Probit],
            policy: PolicySpec {
                ldot0: 1.0,
                sdot0: -1.0,
                mu: 0.0,
            },
            gamma_grid: (-40..=40).map(|k| k as f64 / 100.0).collect(),
            ..Self::table_design(n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.reps < 1 {
            return Err(Error::MinimumReps { required: 1, got: self.reps });
        }
        if self.n < crate::data::MIN_ESTIMATION_ROWS {
            return Err(Error::InvalidArgument(format!(
                "n = {} is below the minimum of {}",
                self.n,
                crate::data::MIN_ESTIMATION_ROWS
            )));
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::InvalidArgument("taus must be non-empty and inside (0, 1)".into()));
        }
        if self.links.is_empty() {
            return Err(Error::InvalidArgument("at least one link is required".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level {} not in (0, 1)", self.level)));
        }
        if self.gamma_grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("gamma grid must be finite".into()));
        }
        self.policy.validate()
    }

    fn with_gamma(&self, gamma: f64) -> NormalLinearDgp {
        NormalLinearDgp { gamma, ..self.dgp }
    }
}

/// One table cell, in the long format used by every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub estimator: String,
    pub link: LinkKind,
    pub tau: f64,
    pub n: usize,
    pub gamma: f64,
    pub statistic: String,
    pub value: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCell {
    pub link: LinkKind,
    pub tau: f64,
    pub gamma: f64,
    pub failed: usize,
    pub reps: usize,
    pub invalid: bool,
}

/// Studentized draws `(estimate - truth) / se` for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentizedSeries {
    pub estimator: String,
    pub link: LinkKind,
    pub tau: f64,
    pub gamma: f64,
    pub values: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
}

/// Rejection rates over the slope grid at one quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub tau: f64,
    pub critical_value: f64,
    pub gamma: Vec<f64>,
    pub raw: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub mc_se: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub rows: Vec<McRow>,
    pub failures: Vec<FailureCell>,
    pub studentized: Vec<StudentizedSeries>,
    pub power: Vec<PowerCurve>,
}

impl McSummary {
    pub fn get(&self, estimator: &str, link: LinkKind, tau: f64, gamma: f64, statistic: &str) -> Option<&McRow> {
        self.rows.iter().find(|r| {
            r.estimator == estimator && r.link == link && r.tau == tau && r.gamma == gamma && r.statistic == statistic
        })
    }

    pub fn invalid_cells(&self) -> impl Iterator<Item = &FailureCell> {
        self.failures.iter().filter(|f| f.invalid)
    }
}

/// What one replication produced in one `(link, tau)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellDraw {
    pi: [f64; 2],
    se: [f64; 2],
    ci: [[f64; 2]; 2],
    t_stat: f64,
}

fn run_cell(
    ds: &crate::data::Dataset,
    link: LinkKind,
    tau: f64,
    policy: &PolicySpec,
    level: f64,
    inference: bool,
) -> Result<CellDraw> {
    let fit = fit_quantile(ds, tau, &EstimationSettings::new(link))?;
    let est = location_scale_from_fit(&fit, policy)?;
    let mut draw = CellDraw {
        pi: [est.pi_l, est.pi_s],
        se: [f64::NAN; 2],
        ci: [[f64::NAN; 2]; 2],
        t_stat: f64::NAN,
    };
    if inference {
        let comps = influence_rows(&fit, &est, &InferenceOptions::default())?;
        let ci = effect_confidence_intervals(&comps, level)?;
        for k in 0..2 {
            draw.se[k] = ci[k].se;
            draw.ci[k] = [ci[k].lower, ci[k].upper];
        }
        draw.t_stat = scale_effect_ttest(&comps, policy.mu)?.t_stat;
    }
    Ok(draw)
}

/// `reps` replications of every `(link, tau)` cell for one slope, in
/// replication order. Indexed as `[rep][link * n_tau + tau]`.
fn replicate(
    cfg: &McConfig,
    pool: &rayon::ThreadPool,
    dgp: &NormalLinearDgp,
    seed: u64,
    inference: bool,
) -> Vec<Vec<Option<CellDraw>>> {
    pool.install(|| {
        (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let ds = match dgp.dataset(cfg.n, seed, rep) {
                    Ok(ds) => ds,
                    Err(_) => return vec![None; cfg.links.len() * cfg.taus.len()],
                };
                let mut out = Vec::with_capacity(cfg.links.len() * cfg.taus.len());
                for &link in &cfg.links {
                    for &tau in &cfg.taus {
                        out.push(run_cell(&ds, link, tau, &cfg.policy, cfg.level, inference).ok());
                    }
                }
                out
            })
            .collect()
    })
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))
}

/// Moments of a sample of Monte Carlo draws around a known truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawMoments {
    pub bias: f64,
    pub bias_se: f64,
    /// `R`-divisor variance, so that `mse = bias^2 + variance`.
    pub variance: f64,
    pub variance_se: f64,
    pub mse: f64,
    pub mse_se: f64,
}

pub fn draw_moments(values: &[f64], truth: f64) -> DrawMoments {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / r;
    let sq: Vec<f64> = values.iter().map(|v| (v - truth).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / r;
    let mse_var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / r;
    DrawMoments {
        bias: mean - truth,
        bias_se: (variance / r).sqrt(),
        variance,
        variance_se: ((m4 - variance * variance).max(0.0) / r).sqrt(),
        mse,
        mse_se: (mse_var / r).sqrt(),
    }
}

/// Proportion with its binomial standard error.
fn proportion(hits: usize, total: usize) -> (f64, f64) {
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

const EFFECTS: [&str; 2] = ["location", "scale"];

struct CellIter<'a> {
    cfg: &'a McConfig,
}

impl CellIter<'_> {
    fn cells(&self) -> impl Iterator<Item = (usize, LinkKind, f64)> + '_ {
        self.cfg.links.iter().enumerate().flat_map(move |(li, &link)| {
            self.cfg
                .taus
                .iter()
                .enumerate()
                .map(move |(ti, &tau)| (li * self.cfg.taus.len() + ti, link, tau))
        })
    }
}

fn collect_cell(draws: &[Vec<Option<CellDraw>>], idx: usize) -> (Vec<CellDraw>, usize) {
    let ok: Vec<CellDraw> = draws.iter().filter_map(|d| d[idx]).collect();
    let failed = draws.len() - ok.len();
    (ok, failed)
}

fn failure_cell(link: LinkKind, tau: f64, gamma: f64, failed: usize, reps: usize) -> FailureCell {
    FailureCell {
        link,
        tau,
        gamma,
        failed,
        reps,
        invalid: failed as f64 > MAX_FAILURE_RATE * reps as f64,
    }
}

fn gamma_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Bias, variance and MSE of both estimators for every link and level.
pub fn run_bias_table(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let pool = build_pool(cfg.workers)?;
    let truths: Vec<_> = cfg
        .taus
        .iter()
        .map(|&tau| closed_form_effects(&cfg.dgp, &cfg.policy, tau))
        .collect::<Result<_>>()?;
    let draws = replicate(cfg, &pool, &cfg.dgp, cfg.seed, false);

    let mut summary = McSummary::default();
    for (idx, link, tau) in (CellIter { cfg }).cells() {
        let ti = cfg.taus.iter().position(|&t| t == tau).unwrap();
        let truth = [truths[ti].pi_l, truths[ti].pi_s];
        let (ok, failed) = collect_cell(&draws, idx);
        summary.failures.push(failure_cell(link, tau, cfg.dgp.gamma, failed, cfg.reps));
        if ok.len() < 2 {
            continue;
        }
        for (k, name) in EFFECTS.iter().enumerate() {
            let values: Vec<f64> = ok.iter().map(|d| d.pi[k]).collect();
            let m = draw_moments(&values, truth[k]);
            for (stat, value, se) in [
                ("bias", m.bias, m.bias_se),
                ("variance", m.variance, m.variance_se),
                ("mse", m.mse, m.mse_se),
            ] {
                summary.rows.push(McRow {
                    estimator: name.to_string(),
                    link,
                    tau,
                    n: cfg.n,
                    gamma: cfg.dgp.gamma,
                    statistic: stat.into(),
                    value,
                    mc_se: se,
                });
            }
        }
    }
    Ok(summary)
}

/// Empirical coverage of the normal intervals for every slope in the grid.
pub fn run_coverage_table(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    let pool = build_pool(cfg.workers)?;
    let mut summary = McSummary::default();
    for (g, &gamma) in cfg.gamma_grid.iter().enumerate() {
        let dgp = cfg.with_gamma(gamma);
        let draws = replicate(cfg, &pool, &dgp, gamma_seed(cfg.seed, g), true);
        for (idx, link, tau) in (CellIter { cfg }).cells() {
            let truth = closed_form_effects(&dgp, &cfg.policy, tau)?;
            let truth = [truth.pi_l, truth.pi_s];
            let (ok, failed) = collect_cell(&draws, idx);
            summary.failures.push(failure_cell(link, tau, gamma, failed, cfg.reps));
            if ok.is_empty() {
                continue;
            }
            for (k, name) in EFFECTS.iter().enumerate() {
                let hits = ok
                    .iter()
                    .filter(|d| d.ci[k][0] <= truth[k] && truth[k] <= d.ci[k][1])
                    .count();
                let (value, mc_se) = proportion(hits, ok.len());
                summary.rows.push(McRow {
                    estimator: name.to_string(),
                    link,
                    tau,
                    n: cfg.n,
                    gamma,
                    statistic: "coverage".into(),
                    value,
                    mc_se,
                });
            }
        }
    }
    Ok(summary)
}

/// Kolmogorov-Smirnov distance of `values` from N(0, 1) and its asymptotic
/// p-value (with Stephens' small-sample correction).
pub fn ks_normal(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::MinimumReps {
            required: 2,
            got: values.len(),
        });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Ok((d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Studentized effects and their distance from the standard normal.
pub fn run_normality_diag(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    if cfg.reps < 2 {
        return Err(Error::MinimumReps {
            required: 2,
            got: cfg.reps,
        });
    }
    let pool = build_pool(cfg.workers)?;
    let mut summary = McSummary::default();
    for (g, &gamma) in cfg.gamma_grid.iter().enumerate() {
        let dgp = cfg.with_gamma(gamma);
        let draws = replicate(cfg, &pool, &dgp, gamma_seed(cfg.seed, g), true);
        for (idx, link, tau) in (CellIter { cfg }).cells() {
            let truth = closed_form_effects(&dgp, &cfg.policy, tau)?;
            let truth = [truth.pi_l, truth.pi_s];
            let (ok, failed) = collect_cell(&draws, idx);
            summary.failures.push(failure_cell(link, tau, gamma, failed, cfg.reps));
            for (k, name) in EFFECTS.iter().enumerate() {
                let values: Vec<f64> = ok
                    .iter()
                    .filter(|d| d.se[k] > 0.0)
                    .map(|d| (d.pi[k] - truth[k]) / d.se[k])
                    .collect();
                if values.len() < 2 {
                    continue;
                }
                let (ks, p) = ks_normal(&values)?;
                for (stat, value) in [("ks_statistic", ks), ("ks_p_value", p)] {
                    summary.rows.push(McRow {
                        estimator: name.to_string(),
                        link,
                        tau,
                        n: cfg.n,
                        gamma,
                        statistic: stat.into(),
                        value,
                        mc_se: 0.0,
                    });
                }
                summary.studentized.push(StudentizedSeries {
                    estimator: name.to_string(),
                    link,
                    tau,
                    gamma,
                    values,
                    ks_statistic: ks,
                    ks_p_value: p,
                });
            }
        }
    }
    Ok(summary)
}

/// Raw and size-adjusted rejection rates of the zero-scale-effect t-test.
///
/// The size adjustment uses the 95% quantile of `|t|` from replications with
/// `gamma = 0`; those are taken from the grid when it contains zero and run
/// separately otherwise.
pub fn run_power_curve(cfg: &McConfig) -> Result<McSummary> {
    cfg.validate()?;
    if cfg.gamma_grid.is_empty() {
        return Err(Error::InvalidArgument("power needs a gamma grid".into()));
    }
    let pool = build_pool(cfg.workers)?;
    let level = 0.05;
    let z_crit = normal_quantile(1.0 - level / 2.0);

    let t_draws = |gamma: f64, k: usize| -> Vec<Vec<Option<CellDraw>>> {
        replicate(cfg, &pool, &cfg.with_gamma(gamma), gamma_seed(cfg.seed, k), true)
    };
    let null_pos = cfg.gamma_grid.iter().position(|&g| g == 0.0);
    let mut per_gamma: Vec<Vec<Vec<Option<CellDraw>>>> = Vec::with_capacity(cfg.gamma_grid.len());
    for (k, &g) in cfg.gamma_grid.iter().enumerate() {
        per_gamma.push(t_draws(g, k));
    }
    let null_draws = match null_pos {
        Some(k) => per_gamma[k].clone(),
        None => t_draws(0.0, cfg.gamma_grid.len()),
    };

    let mut summary = McSummary::default();
    for (idx, link, tau) in (CellIter { cfg }).cells() {
        let (null_ok, _) = collect_cell(&null_draws, idx);
        let abs_t: Vec<f64> = null_ok.iter().map(|d| d.t_stat.abs()).collect();
        if abs_t.is_empty() {
            return Err(Error::InvalidArgument(format!("no usable null replications at tau = {tau}")));
        }
        let critical = sample_quantile(&abs_t, 1.0 - level)?;
        let mut curve = PowerCurve {
            tau,
            critical_value: critical,
            gamma: vec![],
            raw: vec![],
            adjusted: vec![],
            mc_se: vec![],
        };
        for (k, &gamma) in cfg.gamma_grid.iter().enumerate() {
            let (ok, failed) = collect_cell(&per_gamma[k], idx);
            summary.failures.push(failure_cell(link, tau, gamma, failed, cfg.reps));
            if ok.is_empty() {
                continue;
            }
            let raw = proportion(ok.iter().filter(|d| d.t_stat.abs() > z_crit).count(), ok.len());
            let adj = proportion(ok.iter().filter(|d| d.t_stat.abs() > critical).count(), ok.len());
            for (stat, (value, mc_se)) in [("reject_raw", raw), ("reject_adjusted", adj)] {
                summary.rows.push(McRow {
                    estimator: "scale_ttest".into(),
                    link,
                    tau,
                    n: cfg.n,
                    gamma,
                    statistic: stat.into(),
                    value,
                    mc_se,
                });
            }
            curve.gamma.push(gamma);
            curve.raw.push(raw.0);
            curve.adjusted.push(adj.0);
            curve.mc_se.push(adj.1);
        }
        summary.rows.push(McRow {
            estimator: "scale_ttest".into(),
            link,
            tau,
            n: cfg.n,
            gamma: 0.0,
            statistic: "critical_value".into(),
            value: critical,
            mc_se: 0.0,
        });
        summary.power.push(curve);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(reps: usize) -> McConfig {
        McConfig {
            reps,
            taus: vec![0.25, 0.5],
            workers: 2,
            ..McConfig::table_design(200)
        }
    }

    #[test]
    fn moments_decompose() {
        let v = [0.3, 1.2, -0.4, 0.9, 0.05];
        let m = draw_moments(&v, 0.2);
        assert_abs_diff_eq!(m.mse, m.bias * m.bias + m.variance, epsilon = 1e-15);
        assert!(m.variance_se > 0.0);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // scipy.special.kolmogorov
        assert_abs_diff_eq!(kolmogorov_survival(1.0), 0.26999967167735456, epsilon = 1e-12);
        assert_abs_diff_eq!(kolmogorov_survival(1.36), 0.049485876755377876, epsilon = 1e-12);
        assert_abs_diff_eq!(kolmogorov_survival(0.5), 0.9639452436648751, epsilon = 1e-12);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift() {
        let grid: Vec<f64> = (1..1000).map(|k| normal_quantile(k as f64 / 1000.0)).collect();
        let (d, p) = ks_normal(&grid).unwrap();
        assert!(d < 0.002 && p > 0.99);
        let shifted: Vec<f64> = grid.iter().map(|v| v + 0.5).collect();
        assert!(ks_normal(&shifted).unwrap().1 < 1e-6);
        assert!(ks_normal(&[0.1]).is_err());
    }

    #[test]
    fn bias_table_is_worker_independent() {
        let a = run_bias_table(&small(24)).unwrap();
        let b = run_bias_table(&McConfig { workers: 5, ..small(24) }).unwrap();
        assert_eq!(a, b);
        for row in a.rows.iter().filter(|r| r.statistic == "mse") {
            let bias = a.get(&row.estimator, row.link, row.tau, row.gamma, "bias").unwrap().value;
            let var = a.get(&row.estimator, row.link, row.tau, row.gamma, "variance").unwrap().value;
            assert!((row.value - (bias * bias + var)).abs() < 1e-12);
        }
    }

    #[test]
    fn replication_is_independent_of_batch() {
        let cfg = small(6);
        let pool = build_pool(1).unwrap();
        let all = replicate(&cfg, &pool, &cfg.dgp, cfg.seed, true);
        let ds = cfg.dgp.dataset(cfg.n, cfg.seed, 4).unwrap();
        let alone = run_cell(&ds, cfg.links[0], cfg.taus[0], &cfg.policy, 0.95, true).unwrap();
        assert_eq!(all[4][0], Some(alone));
    }

    #[test]
    fn normality_refuses_single_replication() {
        assert!(matches!(
            run_normality_diag(&small(1)),
            Err(Error::MinimumReps { .. })
        ));
    }

    #[test]
    fn mc_standard_errors_shrink_with_reps() {
        let a = run_bias_table(&small(200)).unwrap();
        let b = run_bias_table(&small(400)).unwrap();
        let ra = a.get("location", LinkKind::Probit, 0.5, 1.0, "bias").unwrap();
        let rb = b.get("location", LinkKind::Probit, 0.5, 1.0, "bias").unwrap();
        let ratio = ra.mc_se / rb.mc_se;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn power_with_null_in_grid() {
        let cfg = McConfig {
            reps: 40,
            taus: vec![0.25],
            gamma_grid: vec![-0.2, 0.0, 0.2],
            workers: 3,
            ..McConfig::power_design(200)
        };
        let s = run_power_curve(&cfg).unwrap();
        let null = s.get("scale_ttest", LinkKind::Probit, 0.25, 0.0, "reject_adjusted").unwrap();
        assert!(null.value <= 0.05 + 1e-12);
        assert_eq!(s.power.len(), 1);
        assert_eq!(s.power[0].gamma, cfg.gamma_grid);
    }
}
