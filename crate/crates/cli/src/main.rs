//! `indobs`: simulation, estimation, scheme recommendation and convergence
//! experiments for indirectly observed stationary processes.

mod estimate;
mod lab;
mod manifest;
mod scheme;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use indobs::{Error, ErrorClass};

/// Exit codes, stable across releases.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ASSERT_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const DATA: u8 = 4;
    pub const NUMERICAL: u8 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "indobs", version, about = "Parameter estimation from indirect observations")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the lab (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Exit with status 1 when any acceptance check of a lab run fails.
    #[arg(long = "assert", global = true)]
    pub assert_checks: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a model from a config file and write its trajectories.
    Simulate(simulate::SimulateArgs),
    /// Estimate parameters from a trajectory file.
    Estimate(estimate::EstimateArgs),
    /// Recommend a sub-sampling scheme and its predicted error.
    Scheme(scheme::SchemeArgs),
    /// Run a Monte Carlo convergence experiment.
    Lab(lab::LabArgs),
}

/// Failure of a command: a library error or a usage problem found after parsing.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(Error::Io(e))
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Lib(e) => match e.class() {
                ErrorClass::Validation => exit::VALIDATION,
                ErrorClass::Data => exit::DATA,
                ErrorClass::Numerical => exit::NUMERICAL,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

pub type CliResult<T = u8> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate::run(&cli.global, a),
        Command::Estimate(a) => estimate::run(&cli.global, a),
        Command::Scheme(a) => scheme::run(&cli.global, a),
        Command::Lab(a) => lab::run(&cli.global, a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
