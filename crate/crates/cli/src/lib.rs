//! Command-line front end for protective-core: reads a JSON experiment
//! description, runs it and writes a JSON result document plus a CSV table.

pub mod config;
pub mod output;
pub mod run;

use thiserror::Error;

pub use config::{parse_config, ExperimentConfig, Mode, Plan};
pub use run::{execute, run_experiment, Outcome};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Simulation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}
