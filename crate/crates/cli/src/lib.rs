//! `qreporter`: simulation, oracle runs, synthetic data, fitting and
//! localization from the command line.
//!
//! Every run writes its outputs plus a `manifest.toml` into `--out`. The
//! manifest records the arguments, the resolved config, the seed and the
//! constants version; `qreporter replay` re-executes it.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use reporter_core::Error;

pub use manifest::{RunManifest, MANIFEST_FILE};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// I/O and anything not listed below.
    pub const FAILURE: i32 = 1;
    /// Bad command line.
    pub const USAGE: i32 = 2;
    /// Malformed config or data file, or an unsupported format version.
    pub const SCHEMA: i32 = 3;
    /// Optimizer did not converge, no degrees of freedom, or budget exhausted.
    pub const CONVERGENCE: i32 = 4;
    /// Oracle Hilbert space too large.
    pub const DIMENSION: i32 = 5;
    /// Physically invalid input (field range, geometry, pulse channel, ...).
    pub const INVALID_INPUT: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "qreporter", version, about = "Surface reporter-spin magnetic resonance toolkit")]
pub struct Cli {
    /// No progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noiseless analytic trace of a config.
    Simulate(SimulateArgs),
    /// Density-matrix trace of a config (ideal pulses).
    Oracle(OracleArgs),
    /// Noisy synthetic trace, or a multi-angle DEER dataset with --angles.
    Synth(SynthArgs),
    /// Least-squares fit of a trace table.
    Fit(FitArgs),
    /// Reporter probability maps from a multi-angle dataset.
    Localize(LocalizeArgs),
    /// Synthesize and fit bath echoes over a list of fields, then fit γp.
    ScanField(ScanFieldArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Model id overriding `sequence.model`.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub model: Option<String>,
    /// Number of field directions on a cone about the NV axis (DEER only).
    #[arg(long)]
    pub angles: Option<usize>,
    /// Cone half-angle for --angles, degrees.
    #[arg(long, default_value_t = 30.0)]
    pub polar: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trace table to fit.
    #[arg(long)]
    pub data: PathBuf,
    /// t1, rabi, nv_echo, bath, or deer/eseem/combined with an optional count
    /// suffix (`eseem2` is two protons).
    #[arg(long)]
    pub model: String,
    /// Starting values, `name=value,...`.
    #[arg(long, default_value = "")]
    pub init: String,
    /// Held parameters, `name=value,...`.
    #[arg(long, default_value = "")]
    pub fix: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Dataset manifest written by `synth --angles`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub spins: usize,
    /// Surface grid `HALF_WIDTH:STEP`, nm.
    #[arg(long, default_value = "5:0.5")]
    pub grid: String,
    /// Fixed reporter depth, nm; profiled over 2–10 nm when absent.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Fixed flip probability; fitted when absent.
    #[arg(long)]
    pub flip_prob: Option<f64>,
    /// Cap on profile cells; maps beyond it are marked partial.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanFieldArgs {
    /// Bath scene; its field is replaced by each entry of --fields.
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated field magnitudes, G.
    #[arg(long, value_delimiter = ',', required = true)]
    pub fields: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output directory for the re-run.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) => match e {
                Error::Schema { .. } | Error::VersionMismatch { .. } => exit::SCHEMA,
                Error::NonConvergence { .. } | Error::ZeroDof { .. } | Error::BudgetExceeded { .. } => {
                    exit::CONVERGENCE
                }
                Error::DimensionLimit { .. } => exit::DIMENSION,
                Error::Io(_) => exit::FAILURE,
                _ => exit::INVALID_INPUT,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one parsed command line; `argv` is recorded in the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> CliResult<RunManifest> {
    commands::dispatch(cli, argv)
}
