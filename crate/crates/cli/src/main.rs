//! `upe`: unconditional quantile effects of location, scale and simultaneous
//! covariate shifts, their Monte Carlo study and the normal-model oracle.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

mod config;
mod estimate;
mod simulate;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use upe_core::cdf_model::XBasis;
use upe_core::error::ErrorCategory;
use upe_core::numerics::LinkKind;

#[derive(Parser, Debug)]
#[command(name = "upe", version, about = "Unconditional quantile effects of covariate shifts")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate effects and their standard errors from a CSV file.
    Estimate(EstimateArgs),
    /// Bias/variance/MSE and coverage tables of the simulation design.
    Simulate(SimArgs),
    /// Size and size-adjusted power of the zero-scale-effect t-test.
    Power(SimArgs),
    /// KS statistics and QQ series of the studentized estimators.
    Normality(SimArgs),
    /// Closed-form effects against simulated finite differences.
    Oracle(OracleArgs),
    /// Write a synthetic CSV fixture.
    SynthData(SynthArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Outcome column.
    #[arg(long)]
    pub y: Option<String>,
    /// Target column(s); two with --simultaneous.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<String>>,
    /// Control columns.
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub link: Option<Vec<LinkArg>>,
    #[arg(long)]
    pub basis: Option<BasisArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub ldot0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sdot0: Option<f64>,
    /// Scale pivot; defaults to the sample mean of the target.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Joint location shift of two targets.
    #[arg(long)]
    pub simultaneous: bool,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub ldot: Option<Vec<f64>>,
    #[arg(long)]
    pub log_outcome: bool,
    /// Kernel bandwidth; default 1.06 sd(Y) n^(-1/4).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Confidence level of the intervals.
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 or absent uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Sample size(s); `simulate` accepts a list.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Paper-scale replication count.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Half-width of the central differences.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Simulated draws per quantile evaluation.
    #[arg(long)]
    pub nsim: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub profile: Profile,
    /// Rows; 526 for wage1-like, 1000 for mc.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Wage-equation schema: wage, lwage, educ, exper, tenure, nonwhite, female.
    #[value(name = "wage1-like")]
    Wage1Like,
    /// The simulation design: y = x + u with standard normal x and u.
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    Probit,
    Logit,
}

impl From<LinkArg> for LinkKind {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Probit => LinkKind::Probit,
            LinkArg::Logit => LinkKind::Logit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Linear,
    Quadratic,
}

impl From<BasisArg> for XBasis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Linear => XBasis::Linear,
            BasisArg::Quadratic => XBasis::Quadratic,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration detected by the CLI itself.
    Config(String),
    /// Library error, optionally tagged with where it happened.
    Core {
        context: Option<String>,
        source: upe_core::Error,
    },
}

impl CliError {
    pub fn at(context: impl Into<String>) -> impl FnOnce(upe_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core {
            context: Some(context),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numerical => 4,
            },
        }
    }
}

impl From<upe_core::Error> for CliError {
    fn from(source: upe_core::Error) -> Self {
        CliError::Core { context: None, source }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Core { context: Some(c), source } => write!(f, "{c}: {source}"),
            CliError::Core { context: None, source } => write!(f, "{source}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate::run(a),
        Command::Simulate(a) => simulate::simulate(a),
        Command::Power(a) => simulate::power(a),
        Command::Normality(a) => simulate::normality(a),
        Command::Oracle(a) => simulate::oracle(a),
        Command::SynthData(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
