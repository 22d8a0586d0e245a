//! Batch front door for the axially based covariance toolkit: simulation,
//! likelihood evaluation, preprocessing, mean removal, fitting and
//! diagnostics over GCG grid files.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Errors carry a machine-parsable class; each class maps to a distinct
/// exit code (documented in the README).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("malformed-file: {0}")]
    Malformed(String),
    #[error("constraint: {0}")]
    Constraint(String),
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Malformed(_) => 3,
            CliError::Constraint(_) => 4,
            CliError::NonConvergence(_) => 5,
            CliError::Numerical(_) => 6,
        }
    }
}

impl From<axisym::CovError> for CliError {
    fn from(e: axisym::CovError) -> Self {
        CliError::Constraint(e.to_string())
    }
}

impl From<axisym::GeometryError> for CliError {
    fn from(e: axisym::GeometryError) -> Self {
        CliError::Constraint(e.to_string())
    }
}

impl From<axisym::SpectralError> for CliError {
    fn from(e: axisym::SpectralError) -> Self {
        match e {
            axisym::SpectralError::IndefiniteBlock { .. }
            | axisym::SpectralError::DenseFactorization { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Constraint(other.to_string()),
        }
    }
}

impl From<axisym::PrepError> for CliError {
    fn from(e: axisym::PrepError) -> Self {
        CliError::Constraint(e.to_string())
    }
}

impl From<axisym::MeanFieldError> for CliError {
    fn from(e: axisym::MeanFieldError) -> Self {
        match e {
            axisym::MeanFieldError::RankDeficient { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Constraint(other.to_string()),
        }
    }
}

impl From<axisym::DiagnosticsError> for CliError {
    fn from(e: axisym::DiagnosticsError) -> Self {
        CliError::Constraint(e.to_string())
    }
}

impl From<axisym::FitError> for CliError {
    fn from(e: axisym::FitError) -> Self {
        match e {
            axisym::FitError::Spectral(s) => CliError::from(s),
            other => CliError::Constraint(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "axisym",
    about = "Nonstationary covariance models on the sphere: simulate, fit and diagnose \
             axially symmetric Gaussian fields on regular lat-lon grids",
    version
)]
struct Cli {
    /// Cap on worker threads (default: all cores; AXISYM_THREADS works too)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw exact Gaussian samples of a covariance model on a grid
    Simulate(SimulateArgs),
    /// Maximize the exact likelihood over the free covariance parameters
    Fit(FitArgs),
    /// Evaluate the exact log-likelihood of a field under given parameters
    Loglik(LoglikArgs),
    /// Regress a field on real spherical harmonics and emit the residual
    MeanFit(MeanFitArgs),
    /// Impute missing cells and/or taper each latitude row
    Preprocess(PreprocessArgs),
    /// Empirical and fitted summary curves and directional variograms
    Diagnose(DiagnoseArgs),
    /// Print a model's polynomial orders and parameter count
    ModelInfo(ModelInfoArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model letter A..J or custom:<m>:<n1|->:<n2|->:<n3|->
    #[arg(long)]
    model: String,
    /// Parameter file (name = value lines)
    #[arg(long)]
    params: std::path::PathBuf,
    /// Grid as MxN:<lat_min>:<lat_max>[:center|:edge]
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Output field file; with --reps k > 1 files get an .r<i> infix
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: String,
    /// Complete (imputed) field file
    #[arg(long)]
    data: std::path::PathBuf,
    /// Initial values: 'auto' or a parameter file
    #[arg(long, default_value = "auto")]
    init: String,
    /// Comma-separated parameters to hold fixed (adds to the init file's)
    #[arg(long)]
    fixed: Option<String>,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 20080214)]
    seed: u64,
    /// Fit report output (doubles as a parameter file)
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct LoglikArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    data: std::path::PathBuf,
    /// Parameter file or fit report (model may come from the file)
    #[arg(long)]
    params: std::path::PathBuf,
    /// Optional file to write the value to (it is always printed)
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct MeanFitArgs {
    #[arg(long)]
    data: std::path::PathBuf,
    /// Maximum spherical-harmonic degree
    #[arg(long, default_value_t = 12)]
    degree: usize,
    /// Weight cells by cos(latitude)
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    out_mean: Option<std::path::PathBuf>,
    #[arg(long)]
    out_residual: Option<std::path::PathBuf>,
    #[arg(long)]
    out_coeffs: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    data: std::path::PathBuf,
    /// Fill missing cells from 8-neighbor averages (multi-pass)
    #[arg(long)]
    impute: bool,
    /// Apply a split cosine-bell taper with this per-end fraction
    #[arg(long)]
    taper: Option<f64>,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    data: std::path::PathBuf,
    /// One of var-by-lon, var-by-lat, lon-diff1, lon-diff2, cross-diff,
    /// dirvario
    #[arg(long)]
    which: String,
    /// Fit report supplying both model and parameters
    #[arg(long)]
    fit: Option<std::path::PathBuf>,
    /// Model letter (with --params) when not using --fit
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    params: Option<std::path::PathBuf>,
    /// Latitude row (0-based, ascending latitude); required for dirvario
    #[arg(long)]
    lat_index: Option<usize>,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct ModelInfoArgs {
    #[arg(long)]
    model: String,
}

fn thread_cap(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("AXISYM_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    if let Some(cap) = thread_cap(cli.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cap.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Loglik(args) => commands::loglik(args),
        Command::MeanFit(args) => commands::mean_fit(args),
        Command::Preprocess(args) => commands::preprocess(args),
        Command::Diagnose(args) => commands::diagnose(args),
        Command::ModelInfo(args) => commands::model_info(args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
