//! Command-line experiment runner for `viscwave-core`.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use viscwave_core::Error as CoreError;

pub use commands::{
    AdmissibilityParams, DerivationParams, HolderParams, KernelTableParams, MomentsParams,
    PicardParams,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidGrid(_)
            | CoreError::InvalidParameter { .. }
            | CoreError::InsufficientResolution(_)
            | CoreError::NotFunctionValued(_)
            | CoreError::UnsupportedKind
            | CoreError::FitWindowEmpty
            | CoreError::InsufficientLagSpan(_)
            | CoreError::ShapeMismatch { .. } => {
                Self::Config(format!("invalid configuration: {e}"))
            }
            other => Self::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "viscwave",
    version,
    about = "Stochastic viscous wave experiments"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON file with the subcommand parameters; explicit flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (1 gives a fully sequential run).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "VISCWAVE_OUT",
        default_value = "viscwave-out"
    )]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an ensemble and write a snapshot and pointwise statistics.
    Simulate(commands::SimArgs),
    /// L^q norms of the kernels against quadrature or refinement oracles.
    KernelTable(commands::KernelTableArgs),
    /// Cutoff-ladder square-integrability verdict.
    Admissibility(commands::AdmissibilityArgs),
    /// Structure-function Hölder exponent of an ensemble.
    HolderEstimate(commands::HolderArgs),
    /// Suprema of pointwise moments E|u|^p.
    Moments(commands::MomentsArgs),
    /// Stokes half-space identities over a frequency sweep.
    DerivationCheck(commands::DerivationArgs),
    /// Picard gaps on frozen noise with the factorial envelope.
    PicardDemo(commands::PicardArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate(a) => commands::simulate(g, a),
        Command::KernelTable(a) => commands::kernel_table(g, a),
        Command::Admissibility(a) => commands::admissibility(g, a),
        Command::HolderEstimate(a) => commands::holder(g, a),
        Command::Moments(a) => commands::moments(g, a),
        Command::DerivationCheck(a) => commands::derivation(g, a),
        Command::PicardDemo(a) => commands::picard(g, a),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.global.threads;
    log::debug!("{:?}", cli.command);
    let result = match threads {
        Some(0) => Err(CliError::Config(
            "invalid configuration: `threads` must be at least 1".into(),
        )),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cli))),
        None => dispatch(cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
