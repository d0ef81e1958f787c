//! Shared numerical primitives: order-statistic quantiles, Gaussian kernel
//! density estimation and the probit/logit link functions.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn normal_pdf(v: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * v * v).exp()
}

/// Standard normal distribution function, accurate in both tails.
#[inline]
pub fn normal_cdf(v: f64) -> f64 {
    0.5 * erfc(-v * FRAC_1_SQRT_2)
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level {tau} outside (0, 1)"
        )));
    }
    Ok(())
}

/// One-based rank `ceil(n * tau)` of the order statistic that minimizes the
/// check-function objective. Products within a few ulps of an integer are
/// snapped to it so that e.g. `n = 10, tau = 0.7` selects rank 7, not 8.
pub fn quantile_rank(n: usize, tau: f64) -> usize {
    let prod = n as f64 * tau;
    let nearest = prod.round();
    let k = if (prod - nearest).abs() <= 8.0 * f64::EPSILON * prod.max(1.0) {
        nearest
    } else {
        prod.ceil()
    };
    (k as usize).clamp(1, n)
}

/// Smallest minimizer of `sum_i (tau - 1{y_i <= q})(y_i - q)`, i.e. the
/// order statistic `y_(ceil(n tau))`.
pub fn sample_quantile(y: &[f64], tau: f64) -> Result<f64> {
    check_finite(y)?;
    check_tau(tau)?;
    let k = quantile_rank(y.len(), tau);
    let mut buf = y.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Same as [`sample_quantile`] on an already sorted slice.
pub fn sorted_quantile(sorted: &[f64], tau: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    check_tau(tau)?;
    Ok(sorted[quantile_rank(sorted.len(), tau) - 1])
}

/// Sample mean and (n - 1)-divisor standard deviation.
pub fn mean_sd(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Bandwidth `1.06 * sd(y) * n^(-1/4)`.
///
/// The `n^(-1/4)` rate undersmooths relative to the usual `n^(-1/5)` so that
/// `n h^3 -> inf` and `n h^5 -> 0`, which the inference for the effect
/// estimators needs.
pub fn silverman_bandwidth(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "bandwidth rule needs at least two observations".into(),
        ));
    }
    check_finite(y)?;
    let (_, sd) = mean_sd(y);
    if sd <= 0.0 {
        return Err(Error::DegenerateSample);
    }
    Ok(1.06 * sd * (y.len() as f64).powf(-0.25))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

/// A second-order kernel with its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self {
            kind: KernelKind::Gaussian,
            bandwidth,
        })
    }

    /// Gaussian kernel with the `1.06 sd n^(-1/4)` bandwidth for `y`.
    pub fn gaussian_auto(y: &[f64]) -> Result<Self> {
        Self::gaussian(silverman_bandwidth(y)?)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `K(u)`.
    #[inline]
    pub fn kernel(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => normal_pdf(u),
        }
    }

    /// `K'(u)`.
    #[inline]
    pub fn kernel_derivative(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => -u * normal_pdf(u),
        }
    }

    /// Rescaled kernel `K_h(u) = K(u / h) / h`.
    #[inline]
    pub fn scaled(&self, u: f64) -> f64 {
        self.kernel(u / self.bandwidth) / self.bandwidth
    }
}

/// Kernel density estimate `n^-1 sum_i K_h(y_i - point)`.
pub fn kde_at(y: &[f64], point: f64, kernel: &KernelSpec) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    let sum: f64 = y.iter().map(|&yi| kernel.scaled(yi - point)).sum();
    Ok(sum / y.len() as f64)
}

/// Binary-response link `G`: a strictly increasing distribution function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Probit,
    Logit,
}

impl LinkKind {
    pub const ALL: [LinkKind; 2] = [LinkKind::Probit, LinkKind::Logit];

    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Probit => "probit",
            LinkKind::Logit => "logit",
        }
    }

    /// `G(v)`.
    #[inline]
    pub fn cdf(self, v: f64) -> f64 {
        match self {
            LinkKind::Probit => normal_cdf(v),
            LinkKind::Logit => logistic(v),
        }
    }

    /// `G^-1(p)`, used for starting values.
    pub fn inverse_cdf(self, p: f64) -> f64 {
        match self {
            LinkKind::Probit => normal_quantile(p),
            LinkKind::Logit => (p / (1.0 - p)).ln(),
        }
    }

    /// `(G, g, g')` at `v`.
    #[inline]
    pub fn eval(self, v: f64) -> LinkValues {
        match self {
            LinkKind::Probit => {
                let pdf = normal_pdf(v);
                LinkValues {
                    cdf: normal_cdf(v),
                    pdf,
                    pdf_derivative: -v * pdf,
                }
            }
            LinkKind::Logit => {
                let cdf = logistic(v);
                // 1 - G computed directly keeps g accurate in the upper tail.
                let pdf = cdf * logistic(-v);
                LinkValues {
                    cdf,
                    pdf,
                    pdf_derivative: pdf * (1.0 - 2.0 * cdf),
                }
            }
        }
    }
}

impl std::fmt::Display for LinkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LinkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "probit" => Ok(LinkKind::Probit),
            "logit" => Ok(LinkKind::Logit),
            other => Err(Error::InvalidArgument(format!("unknown link {other:?}"))),
        }
    }
}

#[inline]
fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkValues {
    pub cdf: f64,
    pub pdf: f64,
    pub pdf_derivative: f64,
}

/// Convenience wrapper returning `(G, g, g')`.
pub fn link_eval(link: LinkKind, v: f64) -> (f64, f64, f64) {
    let lv = link.eval(v);
    (lv.cdf, lv.pdf, lv.pdf_derivative)
}

/// `sqrt(2 pi)`, exposed for tests that check kernel normalizations.
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
