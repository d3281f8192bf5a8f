//! Command-line front end: argument parsing, orchestration and artifact output.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod svg;

use args::{Cli, Command};
use error::{CliError, CliResult};

/// Caps the global rayon pool from `GMC_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("GMC_THREADS") else {
        return Ok(());
    };
    let threads: usize =
        raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            CliError::Config(format!("GMC_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Eval(a) => commands::eval(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::Ablation(a) => commands::ablation(a),
        Command::Combine(a) => commands::combine(a),
    }
}
