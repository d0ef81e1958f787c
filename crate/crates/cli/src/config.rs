//! TOML run configuration. Every key is optional; the subcommand's profile
//! supplies defaults and command-line flags override whatever the file says.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use upe_core::cdf_model::XBasis;
use upe_core::effects::PolicySpec;
use upe_core::mc::McConfig;
use upe_core::numerics::LinkKind;
use upe_core::oracle::{CovariateDist, NormalLinearDgp};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub mu_x: Option<f64>,
    pub sigma_x: Option<f64>,
    pub sigma_u: Option<f64>,
    pub covariate: Option<CovariateDist>,
}

impl DgpSection {
    pub fn apply(&self, base: NormalLinearDgp) -> NormalLinearDgp {
        NormalLinearDgp {
            lambda: self.lambda.unwrap_or(base.lambda),
            gamma: self.gamma.unwrap_or(base.gamma),
            mu_x: self.mu_x.unwrap_or(base.mu_x),
            sigma_x: self.sigma_x.unwrap_or(base.sigma_x),
            sigma_u: self.sigma_u.unwrap_or(base.sigma_u),
            covariate: self.covariate.unwrap_or(base.covariate),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub ldot0: Option<f64>,
    pub sdot0: Option<f64>,
    pub mu: Option<f64>,
}

impl PolicySection {
    pub fn apply(&self, base: PolicySpec) -> PolicySpec {
        PolicySpec {
            ldot0: self.ldot0.unwrap_or(base.ldot0),
            sdot0: self.sdot0.unwrap_or(base.sdot0),
            mu: self.mu.unwrap_or(base.mu),
        }
    }
}

/// Which tables `simulate` produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Bias,
    Coverage,
}

/// `n = 1000` or `n = [500, 1000]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Sizes {
    One(usize),
    Many(Vec<usize>),
}

impl Sizes {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Sizes::One(n) => vec![*n],
            Sizes::Many(v) => v.clone(),
        }
    }
}

/// `sim.toml` for `simulate`, `power`, `normality` and `oracle`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub n: Option<Sizes>,
    pub reps: Option<usize>,
    /// Paper-scale replication count (10,000).
    pub full_scale: Option<bool>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub taus: Option<Vec<f64>>,
    pub links: Option<Vec<LinkKind>>,
    pub gamma_grid: Option<Vec<f64>>,
    pub level: Option<f64>,
    pub tables: Option<Vec<Table>>,
    pub delta: Option<f64>,
    pub nsim: Option<usize>,
    pub dgp: Option<DgpSection>,
    pub policy: Option<PolicySection>,
}

pub const FULL_SCALE_REPS: usize = 10_000;

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl SimFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), read_toml)
    }

    /// Overlays the file on a profile (sample size excepted). The policy
    /// pivot follows `dgp.mu_x` unless it is set explicitly, so that the
    /// closed-form truth exists.
    pub fn apply(&self, base: McConfig) -> McConfig {
        let dgp = self.dgp.as_ref().map_or(base.dgp, |d| d.apply(base.dgp));
        let mut policy = base.policy;
        if self.dgp.as_ref().and_then(|d| d.mu_x).is_some() && policy.mu == base.dgp.mu_x {
            policy.mu = dgp.mu_x;
        }
        let policy = self.policy.as_ref().map_or(policy, |p| p.apply(policy));
        let reps = match (self.reps, self.full_scale) {
            (Some(r), _) => r,
            (None, Some(true)) => FULL_SCALE_REPS,
            _ => base.reps,
        };
        McConfig {
            dgp,
            n: base.n,
            reps,
            taus: self.taus.clone().unwrap_or(base.taus),
            links: self.links.clone().unwrap_or(base.links),
            policy,
            seed: self.seed.unwrap_or(base.seed),
            gamma_grid: self.gamma_grid.clone().unwrap_or(base.gamma_grid),
            workers: self.workers.unwrap_or(base.workers),
            level: self.level.unwrap_or(base.level),
        }
    }
}

/// Optional `[estimate]` configuration, mirroring the `estimate` flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateFile {
    pub data: Option<PathBuf>,
    pub y: Option<String>,
    pub x: Option<Vec<String>>,
    pub w: Option<Vec<String>>,
    pub taus: Option<Vec<f64>>,
    pub links: Option<Vec<LinkKind>>,
    pub basis: Option<XBasis>,
    pub bandwidth: Option<f64>,
    pub log_outcome: Option<bool>,
    pub level: Option<f64>,
    pub out: Option<PathBuf>,
    pub policy: Option<PolicySection>,
    pub simultaneous: Option<SimultaneousSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimultaneousSection {
    pub ldot: Option<Vec<f64>>,
}

impl EstimateFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), read_toml)
    }
}
