//! The `sface` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 model-fit
//! failure.

pub mod args;
mod commands;
mod report;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use sface_core::error::ErrorKind;
use thiserror::Error;

pub use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model fit failed: {0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Fit(_) => 4,
        }
    }
}

impl From<sface_core::Error> for CliError {
    fn from(e: sface_core::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Config => CliError::Config(msg),
            ErrorKind::Data => CliError::Data(msg),
            ErrorKind::Fit => CliError::Fit(msg),
        }
    }
}

impl From<sface_core::data::DataError> for CliError {
    fn from(e: sface_core::data::DataError) -> Self {
        CliError::from(sface_core::Error::from(e))
    }
}

/// Run a parsed command line inside a pool of `cli.threads` workers.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| match cli.command {
        Command::Estimate(a) => commands::estimate(a.resolve()?),
        Command::Sensitivity(a) => commands::sensitivity(a.resolve()?),
        Command::Simulate(a) => commands::simulate(a.resolve()?),
        Command::Profiles(a) => commands::profiles(a.resolve()?),
    })
}

pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sface: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Write `bytes` to `path`, or standard output when `path` is `None`.
pub(crate) fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Data(format!("cannot write output: {e}"));
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(io),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).map_err(io)?;
            out.flush().map_err(io)
        }
    }
}
