//! Command-line front end for `georisk-core`: CSV ingestion, risk maps,
//! the Monte Carlo study and file outputs.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod svg;

use args::{Cli, Command};
use config::{FitConfig, RiskmapConfig, SimulateConfig, SynthConfig};
pub use error::{CliError, Result};

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

/// Resolves the configuration for `cli` and runs the command.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Riskmap(a) => {
            let cfg = RiskmapConfig::resolve(a)?;
            log::debug!("resolved config: {}", serde_json::to_string(&cfg).unwrap_or_default());
            with_threads(cfg.common.threads, || commands::riskmap(&cfg))
        }
        Command::Fit(a) => {
            let cfg = FitConfig::resolve(a)?;
            log::debug!("resolved config: {}", serde_json::to_string(&cfg).unwrap_or_default());
            with_threads(cfg.common.threads, || commands::fit(&cfg))
        }
        Command::Simulate(a) => {
            let cfg = SimulateConfig::resolve(a)?;
            log::debug!("resolved config: {}", serde_json::to_string(&cfg).unwrap_or_default());
            with_threads(cfg.threads, || commands::simulate(&cfg))
        }
        Command::SynthData(a) => {
            let cfg = SynthConfig::resolve(a)?;
            with_threads(cfg.threads, || commands::synth_data(&cfg))
        }
    }
}
