//! Experiment runner behind the `decoq` binary.
//!
//! A run is one JSON config ([`config::ExperimentConfig`]) and one command;
//! [`commands`] turns it into a report, [`report`] renders it. Failures map
//! onto fixed exit codes through [`CliError::exit_code`].

pub mod commands;
pub mod config;
pub mod report;

use decoq_core::evolution::EvolutionError;
use decoq_core::linalg::LinalgError;
use decoq_core::{EntropyError, ModelError, StateError};
use thiserror::Error;

pub use commands::{cmd_fig1, cmd_simulate, cmd_sweep, cmd_td, cmd_validate, Fig1Curve, Simulation};
pub use config::{parse_config, ExperimentConfig, Format};
pub use report::{parse_report, parse_series_csv, Report};

pub const ENV_DIM_CAP: &str = "DECOQ_DIM_CAP";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }
}

fn linalg_error(e: &LinalgError) -> CliError {
    match e {
        LinalgError::Capacity { .. } => CliError::Capacity(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        if e.is_capacity() {
            return CliError::Capacity(e.to_string());
        }
        match &e {
            ModelError::Spec(_) | ModelError::State(StateError::InvalidSpec(_)) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        match &e {
            EntropyError::Linalg(l) => linalg_error(l),
            EntropyError::State(s) => ModelError::State(s.clone()).into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<EvolutionError> for CliError {
    fn from(e: EvolutionError) -> Self {
        match e {
            EvolutionError::Usage(msg) => CliError::Config(msg),
            EvolutionError::Linalg(l) => linalg_error(&l),
            EvolutionError::Entropy(inner) => inner.into(),
        }
    }
}

/// Apply `DECOQ_DIM_CAP` if set. An unparsable value is a config error.
pub fn apply_dim_cap_env() -> Result<(), CliError> {
    match std::env::var(ENV_DIM_CAP) {
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| CliError::Config(format!("{ENV_DIM_CAP}={v:?} is not a positive integer")))?;
            decoq_core::linalg::set_dim_cap(cap);
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(CliError::Config(format!("{ENV_DIM_CAP}: {e}"))),
    }
}
