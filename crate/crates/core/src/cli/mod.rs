//! Batch command line: `simulate`, `oracle`, `estimate`, `fit`, `mse-study`.
//!
//! Exit codes: 0 ok, 2 configuration error, 3 design error, 4 data error.

mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
pub use commands::{cmd_estimate, cmd_fit, cmd_mse_study, cmd_oracle, cmd_simulate, Overrides};
pub use config::{load_config, parse_config, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DESIGN: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ccd", version, about = "Simulate and analyze experiments on personalized recommenders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the design seed (synthetic worlds: the world seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides `workers`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Burn in, assign cohorts, run the experiment, write the panel.
    Simulate,
    /// Write oracle effect series.
    Oracle,
    /// Run estimators on a panel.
    Estimate {
        #[arg(long)]
        panel: PathBuf,
    },
    /// Fit saturating curves to estimated effects and extrapolate.
    Fit {
        #[arg(long)]
        effects: PathBuf,
    },
    /// Replicated synthetic fits across horizons.
    MseStudy,
}

/// Failure of a subcommand, already classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(e) => match e {
                Error::InvalidWorld(_) | Error::InvalidHorizon(_) => EXIT_CONFIG,
                Error::InvalidFractions(_)
                | Error::PoolExhausted { .. }
                | Error::EmptyCdt(_)
                | Error::InvalidDesign(_)
                | Error::ClusterTreatmentDependence
                | Error::EmptyCandidates(_)
                | Error::MissingMatch { .. }
                | Error::DegenerateDesign(_)
                | Error::PopulationMismatch(_) => EXIT_DESIGN,
                _ => EXIT_DATA,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let Some(path) = cli.config.clone() else {
        eprintln!("config error: --config is required");
        return EXIT_CONFIG;
    };
    let overrides = Overrides { out: cli.out, seed: cli.seed, workers: cli.workers };
    let result = match &cli.command {
        Command::Simulate => cmd_simulate(&path, &overrides),
        Command::Oracle => cmd_oracle(&path, &overrides),
        Command::Estimate { panel } => cmd_estimate(&path, panel, &overrides),
        Command::Fit { effects } => cmd_fit(effects, &path, &overrides),
        Command::MseStudy => cmd_mse_study(&path, &overrides),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
