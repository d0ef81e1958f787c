//! Parametric model for the conditional distribution function at a fixed
//! outcome threshold: `P(Y <= q | X, W) = G(phi_x(X)'alpha + phi_w(W)'beta)`,
//! fitted by binary-response maximum likelihood.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{LinkKind, LinkValues};

/// Basis applied to one target covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XBasis {
    /// `phi(x) = x`
    Linear,
    /// `phi(x) = (x, x^2)`
    Quadratic,
}

impl XBasis {
    pub fn dim(self) -> usize {
        match self {
            XBasis::Linear => 1,
            XBasis::Quadratic => 2,
        }
    }
}

impl std::str::FromStr for XBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(XBasis::Linear),
            "quadratic" => Ok(XBasis::Quadratic),
            other => Err(Error::InvalidArgument(format!("unknown basis {other:?}"))),
        }
    }
}

/// One basis per target covariate. Controls always enter as an intercept plus
/// one linear term each, so the intercept lives in the `phi_w` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub x_basis: Vec<XBasis>,
}

impl BasisSpec {
    pub fn linear(n_targets: usize) -> Self {
        Self::uniform(XBasis::Linear, n_targets)
    }

    pub fn uniform(kind: XBasis, n_targets: usize) -> Self {
        Self {
            x_basis: vec![kind; n_targets],
        }
    }
}

/// Design matrix `Z` with rows `(phi_x(X_i)', phi_w(W_i)')` plus the
/// derivatives of `phi_x` needed by the effect estimators.
#[derive(Debug, Clone)]
pub struct Design {
    pub z: DMatrix<f64>,
    pub d_phi_x: usize,
    pub d_phi_w: usize,
    /// Column blocks of `phi_x` belonging to each target.
    pub target_blocks: Vec<Range<usize>>,
    /// For target `j`, an `n x d_phi_x` matrix whose row `i` is
    /// `d phi_x(X_i) / d x_j`. With two targets these are the two column
    /// blocks of the block-diagonal derivative matrix.
    pub dphi: Vec<DMatrix<f64>>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// Column index of the constant term.
    pub fn intercept_col(&self) -> usize {
        self.d_phi_x
    }

    /// `d phi_x(X_i)/d x_j ' alpha` for every observation.
    pub fn dphi_alpha(&self, target: usize, theta: &DVector<f64>) -> Vec<f64> {
        let alpha = theta.rows(0, self.d_phi_x);
        let d = &self.dphi[target];
        (0..self.n()).map(|i| d.row(i).dot(&alpha.transpose())).collect()
    }
}

/// Builds `Z` and `d phi_x / dx` for `dataset` under `basis`.
pub fn build_design(dataset: &Dataset, basis: &BasisSpec) -> Result<Design> {
    let k = dataset.n_targets();
    if basis.x_basis.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} target bases for {k} target covariates",
            basis.x_basis.len()
        )));
    }
    let n = dataset.n();
    let mut target_blocks = Vec::with_capacity(k);
    let mut start = 0;
    for b in &basis.x_basis {
        target_blocks.push(start..start + b.dim());
        start += b.dim();
    }
    let d_phi_x = start;
    let d_phi_w = 1 + dataset.w.len();
    let d = d_phi_x + d_phi_w;
    if n < d + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{n} observations for {d} coefficients"
        )));
    }

    let mut z = DMatrix::zeros(n, d);
    let mut dphi = vec![DMatrix::zeros(n, d_phi_x); k];
    for (j, (b, block)) in basis.x_basis.iter().zip(&target_blocks).enumerate() {
        let xj = &dataset.x[j];
        for i in 0..n {
            let x = xj[i];
            z[(i, block.start)] = x;
            dphi[j][(i, block.start)] = 1.0;
            if *b == XBasis::Quadratic {
                z[(i, block.start + 1)] = x * x;
                dphi[j][(i, block.start + 1)] = 2.0 * x;
            }
        }
    }
    for i in 0..n {
        z[(i, d_phi_x)] = 1.0;
        for (c, col) in dataset.w.iter().enumerate() {
            z[(i, d_phi_x + 1 + c)] = col[i];
        }
    }
    Ok(Design {
        z,
        d_phi_x,
        d_phi_w,
        target_blocks,
        dphi,
    })
}

/// Newton-Raphson controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on the max-abs average score.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Coefficients beyond this magnitude are treated as divergence.
    pub coef_limit: f64,
    /// `G` is clipped to `[clip, 1 - clip]` in the likelihood and weights.
    pub clip: f64,
    /// Column started at `G^-1(mean indicator)`; all others start at zero.
    pub intercept_col: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
            coef_limit: 1e4,
            clip: 1e-10,
            intercept_col: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCdfModel {
    pub link: LinkKind,
    pub theta: DVector<f64>,
    /// Threshold defining the binary response, when fitted through
    /// [`fit_at_threshold`].
    pub q_hat: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
    pub clip: f64,
}

impl FittedCdfModel {
    /// Link values at `Z_i' theta` for every row.
    pub fn link_values(&self, z: &DMatrix<f64>) -> Vec<LinkValues> {
        index_values(z, &self.theta, self.link)
    }

    /// Fitted probabilities `G(Z_i' theta)`.
    pub fn fitted_probabilities(&self, z: &DMatrix<f64>) -> Vec<f64> {
        self.link_values(z).iter().map(|lv| lv.cdf).collect()
    }

    /// `alpha`, the coefficients on `phi_x`.
    pub fn alpha(&self, d_phi_x: usize) -> Vec<f64> {
        self.theta.rows(0, d_phi_x).iter().copied().collect()
    }
}

pub(crate) fn index_values(z: &DMatrix<f64>, theta: &DVector<f64>, link: LinkKind) -> Vec<LinkValues> {
    let v = z * theta;
    v.iter().map(|&vi| link.eval(vi)).collect()
}

#[inline]
fn clipped_variance(cdf: f64, clip: f64) -> f64 {
    let p = cdf.clamp(clip, 1.0 - clip);
    p * (1.0 - p)
}

/// `1{y_i <= q}` as 0/1 values.
pub fn indicator_at(y: &[f64], q: f64) -> Vec<f64> {
    y.iter().map(|&v| if v <= q { 1.0 } else { 0.0 }).collect()
}

fn check_indicator(indicator: &[f64], z: &DMatrix<f64>) -> Result<()> {
    if indicator.len() != z.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} design rows",
            indicator.len(),
            z.nrows()
        )));
    }
    if indicator.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("indicator must be 0/1".into()));
    }
    Ok(())
}

fn check_rank(z: &DMatrix<f64>) -> Result<()> {
    let gram = z.transpose() * z;
    let eig = gram.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(0.0, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::RankDeficientDesign);
    }
    Ok(())
}

fn log_likelihood(indicator: &[f64], v: &DVector<f64>, link: LinkKind, clip: f64) -> f64 {
    indicator
        .iter()
        .zip(v.iter())
        .map(|(&d, &vi)| {
            // Both links are symmetric, so 1 - G(v) = G(-v) without cancellation.
            if d > 0.5 {
                link.cdf(vi).clamp(clip, 1.0 - clip).ln()
            } else {
                link.cdf(-vi).clamp(clip, 1.0 - clip).ln()
            }
        })
        .sum()
}

/// Average score and (negative definite) average observed Hessian of the
/// Bernoulli log-likelihood.
fn score_and_hessian(
    indicator: &[f64],
    z: &DMatrix<f64>,
    theta: &DVector<f64>,
    link: LinkKind,
    clip: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = z.nrows();
    let d = z.ncols();
    let v = z * theta;
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..n {
        let lv = link.eval(v[i]);
        let p = lv.cdf.clamp(clip, 1.0 - clip);
        let q = link.cdf(-v[i]).clamp(clip, 1.0 - clip);
        let y = indicator[i];
        let dl = lv.pdf * (y - lv.cdf) / (p * q);
        let d2l = if y > 0.5 {
            (lv.pdf_derivative * p - lv.pdf * lv.pdf) / (p * p)
        } else {
            -(lv.pdf_derivative * q + lv.pdf * lv.pdf) / (q * q)
        };
        let row = z.row(i);
        for a in 0..d {
            grad[a] += dl * row[a];
            let wa = d2l * row[a];
            for b in 0..=a {
                hess[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            hess[(b, a)] = hess[(a, b)];
        }
    }
    let inv_n = 1.0 / n as f64;
    (grad * inv_n, hess * inv_n)
}

fn fisher_information(z: &DMatrix<f64>, lvs: &[LinkValues], clip: f64) -> DMatrix<f64> {
    let weights: Vec<f64> = lvs
        .iter()
        .map(|lv| lv.pdf * lv.pdf / clipped_variance(lv.cdf, clip))
        .collect();
    weighted_gram(z, &weights)
}

/// `n^-1 sum_i w_i Z_i Z_i'`.
pub(crate) fn weighted_gram(z: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = z.nrows();
    let d = z.ncols();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..n {
        let row = z.row(i);
        let w = weights[i];
        for a in 0..d {
            let wa = w * row[a];
            for b in 0..=a {
                out[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            out[(b, a)] = out[(a, b)];
        }
    }
    out / n as f64
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximum-likelihood fit of `P(indicator = 1 | Z) = G(Z' theta)` by
/// Newton-Raphson with step halving.
pub fn fit_binary_link(
    indicator: &[f64],
    z: &DMatrix<f64>,
    link: LinkKind,
    opts: &FitOptions,
) -> Result<FittedCdfModel> {
    check_indicator(indicator, z)?;
    let n = indicator.len();
    let ones = indicator.iter().filter(|&&v| v > 0.5).count();
    if ones == 0 {
        return Err(Error::AllOneClass(0));
    }
    if ones == n {
        return Err(Error::AllOneClass(1));
    }
    check_rank(z)?;

    let d = z.ncols();
    let mut theta = DVector::zeros(d);
    if let Some(c) = opts.intercept_col {
        if c >= d {
            return Err(Error::DimensionMismatch(format!(
                "intercept column {c} outside {d} columns"
            )));
        }
        theta[c] = link.inverse_cdf(ones as f64 / n as f64);
    }

    let mut ll = log_likelihood(indicator, &(z * &theta), link, opts.clip);
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm;
    loop {
        let (grad, hess) = score_and_hessian(indicator, z, &theta, link, opts.clip);
        gradient_norm = max_abs(&grad);
        if gradient_norm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let neg_hess = -hess;
        let step = match neg_hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                // Observed curvature lost definiteness numerically; fall back
                // to a scoring step.
                let info = fisher_information(z, &index_values(z, &theta, link), opts.clip);
                info.cholesky().ok_or(Error::SingularHessian)?.solve(&grad)
            }
        };

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let candidate = &theta + &step * scale;
            let cand_ll = log_likelihood(indicator, &(z * &candidate), link, opts.clip);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs() {
                theta = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::SeparationDetected(format!(
                "step halving failed {} times",
                opts.max_halvings
            )));
        }
        if max_abs(&theta) > opts.coef_limit {
            return Err(Error::SeparationDetected(format!(
                "coefficients exceed {}",
                opts.coef_limit
            )));
        }
    }

    if converged {
        // Clipping keeps the likelihood bounded under separation, so Newton can
        // settle on a finite point that classifies every observation.
        let perfect = index_values(z, &theta, link)
            .iter()
            .zip(indicator)
            .all(|(lv, &d)| (d - lv.cdf).abs() < 1e-6);
        if perfect {
            return Err(Error::SeparationDetected(
                "fitted probabilities classify every observation".into(),
            ));
        }
    }

    Ok(FittedCdfModel {
        link,
        theta,
        q_hat: None,
        converged,
        iterations,
        gradient_norm,
        log_likelihood: ll,
        clip: opts.clip,
    })
}

/// Fits the model for `1{y_i <= q}` and records `q`.
pub fn fit_at_threshold(
    y: &[f64],
    q: f64,
    design: &Design,
    link: LinkKind,
    opts: &FitOptions,
) -> Result<FittedCdfModel> {
    let indicator = indicator_at(y, q);
    let mut opts = opts.clone();
    opts.intercept_col.get_or_insert(design.intercept_col());
    let mut model = fit_binary_link(&indicator, &design.z, link, &opts)?;
    model.q_hat = Some(q);
    Ok(model)
}

fn check_conformable(model: &FittedCdfModel, z: &DMatrix<f64>) -> Result<()> {
    if model.theta.len() != z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} design columns",
            model.theta.len(),
            z.ncols()
        )));
    }
    Ok(())
}

/// `g(Z_i'theta)/(G(1 - G))` per row, with `G` clipped.
fn lambda_factors(model: &FittedCdfModel, z: &DMatrix<f64>) -> Result<(Vec<LinkValues>, Vec<f64>)> {
    let lvs = model.link_values(z);
    let mut factors = Vec::with_capacity(lvs.len());
    for (i, lv) in lvs.iter().enumerate() {
        let var = clipped_variance(lv.cdf, model.clip);
        let f = lv.pdf / var;
        if !f.is_finite() {
            return Err(Error::NumericalUnderflow(i));
        }
        factors.push(f);
    }
    Ok((lvs, factors))
}

/// Per-observation scores
/// `s_i = g(Z_i'theta) Z_i [1{Y_i <= q} - G(Z_i'theta)] / (G (1 - G))`, one row each.
pub fn score_rows(model: &FittedCdfModel, indicator: &[f64], z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_conformable(model, z)?;
    check_indicator(indicator, z)?;
    let (lvs, factors) = lambda_factors(model, z)?;
    let mut out = z.clone();
    for i in 0..z.nrows() {
        let resid = indicator[i] - lvs[i].cdf;
        out.row_mut(i).scale_mut(factors[i] * resid);
    }
    Ok(out)
}

/// `H = n^-1 sum_i g^2 / (G (1 - G)) Z_i Z_i'`.
///
/// This is the information-matrix form: symmetric positive semi-definite,
/// and equal to minus the expected Hessian of the average log-likelihood.
/// Callers that need the (negative definite) Hessian must negate it.
pub fn hessian_avg(model: &FittedCdfModel, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_conformable(model, z)?;
    let lvs = model.link_values(z);
    Ok(fisher_information(z, &lvs, model.clip))
}

/// `Lambda(Z_i, theta) = g(Z_i'theta) Z_i / (G (1 - G))`, one row each.
/// Under the logit link this is `Z_i` itself.
pub fn lambda_weights(model: &FittedCdfModel, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_conformable(model, z)?;
    let (_, factors) = lambda_factors(model, z)?;
    let mut out = z.clone();
    for (i, f) in factors.iter().enumerate() {
        out.row_mut(i).scale_mut(*f);
    }
    Ok(out)
}
