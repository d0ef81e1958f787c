//! Point estimates of unconditional quantile effects.
//!
//! For a policy `X_delta = (X - mu) s(delta) + mu + l(delta)` with `s(0) = 1`,
//! `l(0) = 0`, the marginal effect on the `tau`-quantile of `Y` splits into a
//! location part driven by `l'(0)` and a scale part driven by `s'(0)`. Both
//! are averages of `dF(q|x, w)/dx` over the sample, divided by the density of
//! `Y` at `q`. The survival function enters the population formulas; since
//! `dS/dx = -dF/dx` the estimators carry an explicit leading minus sign.

use serde::{Deserialize, Serialize};

use crate::cdf_model::{build_design, fit_at_threshold, BasisSpec, Design, FitOptions, FittedCdfModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{kde_at, sample_quantile, KernelSpec, LinkKind};

/// Location-scale intervention, described by its derivatives at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    /// `l'(0)`
    pub ldot0: f64,
    /// `s'(0)`
    pub sdot0: f64,
    /// Pivot of the scale change, in units of the target covariate.
    pub mu: f64,
}

impl PolicySpec {
    pub fn new(ldot0: f64, sdot0: f64, mu: f64) -> Result<Self> {
        let p = Self { ldot0, sdot0, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.ldot0, self.sdot0, self.mu].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("policy values must be finite".into()));
        }
        if self.ldot0 == 0.0 && self.sdot0 == 0.0 {
            return Err(Error::InvalidArgument(
                "policy has neither a location nor a scale component".into(),
            ));
        }
        Ok(())
    }

    /// `D_mu = [[-l'(0), 0], [mu s'(0), -s'(0)]]`, mapping the averages
    /// `(mean(m_i), mean(m_i X_i))` onto `f_Y(q) * (Pi_L, Pi_S)`.
    pub fn d_matrix(&self) -> [[f64; 2]; 2] {
        [[-self.ldot0, 0.0], [self.mu * self.sdot0, -self.sdot0]]
    }
}

/// Simultaneous location shifts of two target covariates,
/// `X_j,delta = X_j + l_j(delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousPolicy {
    /// `(l_1'(0), l_2'(0))`
    pub ldot: [f64; 2],
}

impl SimultaneousPolicy {
    pub fn new(ldot: [f64; 2]) -> Result<Self> {
        if !ldot.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("policy values must be finite".into()));
        }
        if ldot == [0.0, 0.0] {
            return Err(Error::InvalidArgument("all location derivatives are zero".into()));
        }
        Ok(Self { ldot })
    }

    /// `D_L = diag(-l_1'(0), -l_2'(0))`.
    pub fn d_matrix(&self) -> [[f64; 2]; 2] {
        [[-self.ldot[0], 0.0], [0.0, -self.ldot[1]]]
    }
}

/// Settings shared by every quantile level of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSettings {
    pub link: LinkKind,
    /// Defaults to a linear basis for every target.
    pub basis: Option<BasisSpec>,
    /// Kernel bandwidth; `None` applies `1.06 sd(Y) n^(-1/4)`.
    pub bandwidth: Option<f64>,
    pub fit: FitOptions,
    /// Density estimates below this make the effect undefined.
    pub density_floor: f64,
    /// Estimate on `log Y` instead of `Y`.
    pub log_outcome: bool,
}

impl EstimationSettings {
    pub fn new(link: LinkKind) -> Self {
        Self {
            link,
            basis: None,
            bandwidth: None,
            fit: FitOptions::default(),
            density_floor: 1e-12,
            log_outcome: false,
        }
    }
}

/// Everything estimated once per quantile level and shared by all effect and
/// inference computations at that level.
#[derive(Debug, Clone)]
pub struct QuantileFit {
    pub tau: f64,
    /// Outcome actually used (log-transformed in log-outcome mode).
    pub y: Vec<f64>,
    /// Target covariates, as in the dataset.
    pub x: Vec<Vec<f64>>,
    pub q_hat: f64,
    pub f_hat: f64,
    pub kernel: KernelSpec,
    pub design: Design,
    pub model: FittedCdfModel,
    pub indicator: Vec<f64>,
    pub log_outcome: bool,
}

impl QuantileFit {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// `g(Z_i'theta) * d phi_x(X_i)/d x_j ' alpha` for each observation:
    /// the derivative of the fitted conditional distribution function with
    /// respect to target `j`.
    pub fn cdf_slopes(&self, target: usize) -> Vec<f64> {
        let lvs = self.model.link_values(&self.design.z);
        let da = self.design.dphi_alpha(target, &self.model.theta);
        lvs.iter().zip(da).map(|(lv, d)| lv.pdf * d).collect()
    }

    /// `(mean(m_i), mean(m_i X_i))` with `m_i` the slope for the single target.
    pub fn location_scale_moments(&self) -> [f64; 2] {
        let m = self.cdf_slopes(0);
        let n = self.n() as f64;
        let a = m.iter().sum::<f64>() / n;
        let b = m.iter().zip(&self.x[0]).map(|(mi, xi)| mi * xi).sum::<f64>() / n;
        [a, b]
    }
}

/// Quantile, density, and conditional-CDF fit at level `tau`.
pub fn fit_quantile(dataset: &Dataset, tau: f64, settings: &EstimationSettings) -> Result<QuantileFit> {
    let owned;
    let ds = if settings.log_outcome {
        owned = dataset.log_outcome()?;
        &owned
    } else {
        dataset
    };
    let q_hat = sample_quantile(&ds.y, tau)?;
    let kernel = match settings.bandwidth {
        Some(h) => KernelSpec::gaussian(h)?,
        None => KernelSpec::gaussian_auto(&ds.y)?,
    };
    let f_hat = kde_at(&ds.y, q_hat, &kernel)?;
    if !(f_hat >= settings.density_floor) {
        return Err(Error::DensityNearZero { tau, density: f_hat });
    }
    let basis = settings
        .basis
        .clone()
        .unwrap_or_else(|| BasisSpec::linear(ds.n_targets()));
    let design = build_design(ds, &basis)?;
    let model = fit_at_threshold(&ds.y, q_hat, &design, settings.link, &settings.fit)?;
    if !model.converged {
        return Err(Error::NotConverged {
            iterations: model.iterations,
            gradient_norm: model.gradient_norm,
        });
    }
    let indicator = crate::cdf_model::indicator_at(&ds.y, q_hat);
    Ok(QuantileFit {
        tau,
        y: ds.y.clone(),
        x: ds.x.clone(),
        q_hat,
        f_hat,
        kernel,
        design,
        model,
        indicator,
        log_outcome: settings.log_outcome,
    })
}

/// Location and scale effects at one quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub tau: f64,
    pub link: LinkKind,
    pub policy: PolicySpec,
    pub pi_l: f64,
    pub pi_s: f64,
    pub pi_total: f64,
    /// Quantile-standard-deviation elasticity; absent when `s'(0) = 0` or
    /// the outcome quantile is zero.
    pub elasticity: Option<f64>,
    pub q_hat: f64,
    pub f_hat: f64,
    pub bandwidth: f64,
    pub log_outcome: bool,
}

/// Applies `f^-1 D` to the moment pair.
fn apply_d(d: [[f64; 2]; 2], moments: [f64; 2], f_hat: f64) -> [f64; 2] {
    [
        (d[0][0] * moments[0] + d[0][1] * moments[1]) / f_hat,
        (d[1][0] * moments[0] + d[1][1] * moments[1]) / f_hat,
    ]
}

/// Location-scale effects from an existing fit.
pub fn location_scale_from_fit(fit: &QuantileFit, policy: &PolicySpec) -> Result<EffectEstimate> {
    if fit.x.len() != 1 {
        return Err(Error::WrongTargetCount {
            expected: 1,
            found: fit.x.len(),
        });
    }
    let [pi_l, pi_s] = apply_d(policy.d_matrix(), fit.location_scale_moments(), fit.f_hat);
    let elasticity = if fit.log_outcome {
        (policy.sdot0 != 0.0).then(|| pi_s / policy.sdot0)
    } else {
        elasticity(pi_s, policy.sdot0, fit.q_hat).ok()
    };
    Ok(EffectEstimate {
        tau: fit.tau,
        link: fit.model.link,
        policy: *policy,
        pi_l,
        pi_s,
        pi_total: pi_l + pi_s,
        elasticity,
        q_hat: fit.q_hat,
        f_hat: fit.f_hat,
        bandwidth: fit.kernel.bandwidth(),
        log_outcome: fit.log_outcome,
    })
}

/// Estimates the location and scale effects at level `tau` for a dataset with
/// one target covariate. The returned fit can be handed to the inference
/// routines.
pub fn estimate_location_scale(
    dataset: &Dataset,
    policy: &PolicySpec,
    tau: f64,
    settings: &EstimationSettings,
) -> Result<(EffectEstimate, QuantileFit)> {
    policy.validate()?;
    if dataset.n_targets() != 1 {
        return Err(Error::WrongTargetCount {
            expected: 1,
            found: dataset.n_targets(),
        });
    }
    let fit = fit_quantile(dataset, tau, settings)?;
    let est = location_scale_from_fit(&fit, policy)?;
    Ok((est, fit))
}

/// Effect of joint location shifts of two targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousEstimate {
    pub tau: f64,
    pub link: LinkKind,
    pub policy: SimultaneousPolicy,
    /// Per-target location effects `(Pi_L,1, Pi_L,2)`.
    pub pi_targets: [f64; 2],
    /// Compensated effect `Pi_L,1 + Pi_L,2`.
    pub pi_c: f64,
    pub q_hat: f64,
    pub f_hat: f64,
    pub bandwidth: f64,
    pub log_outcome: bool,
}

impl QuantileFit {
    /// `(mean(m_i1), mean(m_i2))` for the two targets.
    pub fn simultaneous_moments(&self) -> [f64; 2] {
        let n = self.n() as f64;
        let a = self.cdf_slopes(0).iter().sum::<f64>() / n;
        let b = self.cdf_slopes(1).iter().sum::<f64>() / n;
        [a, b]
    }
}

pub fn simultaneous_from_fit(fit: &QuantileFit, policy: &SimultaneousPolicy) -> Result<SimultaneousEstimate> {
    if fit.x.len() != 2 {
        return Err(Error::WrongTargetCount {
            expected: 2,
            found: fit.x.len(),
        });
    }
    let pi = apply_d(policy.d_matrix(), fit.simultaneous_moments(), fit.f_hat);
    Ok(SimultaneousEstimate {
        tau: fit.tau,
        link: fit.model.link,
        policy: *policy,
        pi_targets: pi,
        pi_c: pi[0] + pi[1],
        q_hat: fit.q_hat,
        f_hat: fit.f_hat,
        bandwidth: fit.kernel.bandwidth(),
        log_outcome: fit.log_outcome,
    })
}

pub fn estimate_simultaneous(
    dataset: &Dataset,
    policy: &SimultaneousPolicy,
    tau: f64,
    settings: &EstimationSettings,
) -> Result<(SimultaneousEstimate, QuantileFit)> {
    if dataset.n_targets() != 2 {
        return Err(Error::WrongTargetCount {
            expected: 2,
            found: dataset.n_targets(),
        });
    }
    let fit = fit_quantile(dataset, tau, settings)?;
    let est = simultaneous_from_fit(&fit, policy)?;
    Ok((est, fit))
}

/// Quantile-standard-deviation elasticity `Pi_S / (s'(0) Q_tau[Y])`.
pub fn elasticity(pi_s: f64, sdot0: f64, q_tau_y: f64) -> Result<f64> {
    if sdot0 == 0.0 {
        return Err(Error::ZeroDenominator("s'(0) is zero"));
    }
    if q_tau_y == 0.0 {
        return Err(Error::ZeroDenominator("outcome quantile is zero"));
    }
    Ok(pi_s / (sdot0 * q_tau_y))
}

/// Coefficient vector with the `phi_x` block replaced, used in tests and by
/// the numerical-Jacobian checks.
#[cfg(test)]
pub(crate) fn with_theta(model: &FittedCdfModel, theta: nalgebra::DVector<f64>) -> FittedCdfModel {
    FittedCdfModel {
        theta,
        ..model.clone()
    }
}
