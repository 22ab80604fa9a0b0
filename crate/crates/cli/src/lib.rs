//! Command-line driver for `mdimpute`.
//!
//! Machine output (CSV or JSON) goes to `--out` or stdout; a short human
//! summary goes to stderr. Every random draw comes from a stream derived from
//! `(seed, stream_id(command, cell, replicate))`, so outputs do not depend on
//! `--threads`.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mdimpute", version, about = "Regression imputation of a single missing covariate")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// JSON run configuration (scenario, n, seed, ...). Flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset and write it as CSV.
    Generate {
        /// Also write x_full and r_x.
        #[arg(long)]
        oracle: bool,
    },
    /// Impute a CSV dataset and fit the outcome model.
    Analyze {
        input: PathBuf,
        #[arg(long)]
        method: Option<String>,
        /// Number of imputations to pool with Rubin's rules (stochastic only).
        #[arg(long)]
        m: Option<usize>,
        /// Bootstrap replicates of the whole impute-and-fit pipeline.
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Extra token read as a missing cell.
        #[arg(long)]
        na_token: Option<String>,
    },
    /// Variance/covariance/slope per method over a grid of Pr(R=1|Z=1).
    Grid,
    /// Replicate generate → impute → fit and summarize the slope's spread.
    Sampling {
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Closed-form moments, attenuation factor and expected variances.
    Theory,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<mdimpute::Error> for CliError {
    fn from(e: mdimpute::Error) -> Self {
        use mdimpute::Error::*;
        let code = match &e {
            Parse { .. } | InvalidParameter(_) | InvalidMethod(_) | InsufficientImputations(_) | Io(_) => 2,
            InsufficientData(_)
            | RankDeficient { .. }
            | NotPositiveDefinite { .. }
            | DegenerateScenario(_)
            | DimensionMismatch { .. } => 3,
            MissingRng => 4,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs a parsed command line on a pool of the requested size.
pub fn run(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.global.threads {
        Some(0) => return Err(CliError::config("--threads must be at least 1")),
        Some(t) => pool = pool.num_threads(t),
        None => {}
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::invariant(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(&cli))
}
