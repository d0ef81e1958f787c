use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the estimation pipeline.
///
/// Variants group into three families that the CLI maps onto exit codes:
/// configuration problems, data problems and numerical failures
/// (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("degenerate sample: zero standard deviation")]
    DegenerateSample,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("binary indicator has a single class (all {0})")]
    AllOneClass(u8),
    #[error("perfect or quasi separation detected: {0}")]
    SeparationDetected(String),
    #[error("numerical underflow: G(1-G) below floor at observation {0}")]
    NumericalUnderflow(usize),
    #[error("fit did not converge after {iterations} iterations (score norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("Hessian is singular")]
    SingularHessian,
    #[error("estimated density {density:e} at quantile level {tau} is below the floor")]
    DensityNearZero { tau: f64, density: f64 },
    #[error("expected {expected} target covariates, found {found}")]
    WrongTargetCount { expected: usize, found: usize },
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("estimated variance is not positive ({0:e})")]
    ZeroVariance(f64),
    #[error("closed form requires pivot mu = mu_x ({mu_x}), got {mu}")]
    PivotMismatch { mu: f64, mu_x: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("at least {required} replications required, got {got}")]
    MinimumReps { required: usize, got: usize },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("estimation needs at least {required} rows, got {found}")]
    TooFewRows { required: usize, found: usize },
    #[error("no usable rows after cleaning")]
    EmptyAfterCleaning,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidArgument(_) | PivotMismatch { .. } | Unsupported(_) | MinimumReps { .. }
            | ThreadPool(_) => ErrorCategory::Config,
            EmptySample | NonFiniteInput | DegenerateSample | DimensionMismatch(_)
            | WrongTargetCount { .. } | MissingColumn(_) | Parse { .. } | TooFewRows { .. } | EmptyAfterCleaning
            | Io { .. } | Csv(_) | Json(_) => ErrorCategory::Data,
            RankDeficientDesign | AllOneClass(_) | SeparationDetected(_) | NumericalUnderflow(_)
            | NotConverged { .. } | SingularHessian | DensityNearZero { .. } | ZeroDenominator(_) | ZeroVariance(_)
            | QuadratureFailure(_) => ErrorCategory::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
