//! Command-line front end for conservative entropic entanglement
//! certification.
//!
//! Exit codes are a stable contract shared by all subcommands:
//! 0 = certified (or: all checks passed), 1 = evaluated but not certified,
//! 2 = a physics precondition failed (coverage, resolution, majorization
//! evidence, background wings), 3 = malformed input or config.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use entrocert_core::witness::Inequality;
use entrocert_core::Error as CoreError;

mod attest;
mod budget;
mod certify;
mod config;
mod filters_check;
mod manifest;
mod simulate;

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Errors carrying their exit code. Input errors cover unreadable or
/// malformed files, configs and flags; precondition errors cover valid
/// inputs whose physics gates fail.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Precondition(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Precondition(_) => EXIT_PRECONDITION,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Precondition(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Coverage { .. }
            | CoreError::UnderResolved { .. }
            | CoreError::PeakInWings { .. }
            | CoreError::DegenerateRatio { .. }
            | CoreError::W0OutOfRange(_) => CliError::Precondition(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "entrocert",
    version,
    about = "Certify energy-time entanglement from coincidence data via conservative entropy bounds"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate an entropic witness on measured or simulated data and
    /// report a certification verdict.
    Certify(CertifyArgs),
    /// Check a filter bank's top-hat majorization and weights.
    FiltersCheck(FiltersCheckArgs),
    /// Print the frequency-side entropy budget implied by a timing bound.
    Budget(BudgetArgs),
    /// Generate a synthetic coincidence campaign as CSV datasets.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InequalityArg {
    SumDiff,
    Conditional,
}

impl From<InequalityArg> for Inequality {
    fn from(v: InequalityArg) -> Self {
        match v {
            InequalityArg::SumDiff => Inequality::SumDiff,
            InequalityArg::Conditional => Inequality::Conditional,
        }
    }
}

#[derive(Args)]
pub struct CertifyArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: std::path::PathBuf,
    /// Directory for reports.
    #[arg(long, default_value = ".")]
    pub out: std::path::PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of bootstrap resamples.
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Override the witness inequality.
    #[arg(long, value_enum)]
    pub inequality: Option<InequalityArg>,
}

#[derive(Args)]
pub struct FiltersCheckArgs {
    /// JSON bank manifest.
    #[arg(long)]
    pub config: std::path::PathBuf,
    /// Directory for the report and plot CSVs.
    #[arg(long, default_value = ".")]
    pub out: std::path::PathBuf,
    /// Check against this lattice spacing instead of the bank's nominal
    /// spacing, rad/s.
    #[arg(long)]
    pub spacing_rad_per_s: Option<f64>,
}

#[derive(Args)]
pub struct BudgetArgs {
    /// Timing FWHM in picoseconds (with --bin-ps; alternative to
    /// --histogram).
    #[arg(long)]
    pub fwhm_ps: Option<f64>,
    /// Histogram bin width in picoseconds.
    #[arg(long)]
    pub bin_ps: Option<f64>,
    /// Measured timing histogram CSV (alternative to --fwhm-ps).
    #[arg(long)]
    pub histogram: Option<std::path::PathBuf>,
    /// Background wing fraction for --histogram.
    #[arg(long, default_value_t = 0.1)]
    pub wing_fraction: f64,
    /// Carrier wavelength for the picometer column.
    #[arg(long, default_value_t = 1550.0)]
    pub wavelength_nm: f64,
    /// Optional directory for budget.json.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON run configuration with a `campaign` section.
    #[arg(long)]
    pub config: std::path::PathBuf,
    /// Directory for the dataset files.
    #[arg(long, default_value = ".")]
    pub out: std::path::PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Cap the global thread pool from ENTROCERT_THREADS before any parallel
/// work runs.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ENTROCERT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::input(format!(
            "ENTROCERT_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    if n == 0 {
        return Err(CliError::input(
            "ENTROCERT_THREADS must be a positive integer, got `0`",
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))
}

fn run() -> Result<i32, CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            print!("{e}");
            return Ok(0);
        }
        Err(e) => return Err(CliError::input(e.to_string())),
    };
    configure_threads()?;
    match cli.cmd {
        Cmd::Certify(args) => certify::run(&args),
        Cmd::FiltersCheck(args) => filters_check::run(&args),
        Cmd::Budget(args) => budget::run(&args),
        Cmd::Simulate(args) => simulate::run(&args),
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
