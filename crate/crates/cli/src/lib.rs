//! Command implementations for the `eci` binary.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use config::{MetricsFormat, ReportToggles, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; exit status 2.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Engine(#[from] eci_core::EciError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
