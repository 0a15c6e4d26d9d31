//! Scenario runner for predictive cost adaptive control of Lur'e systems:
//! configuration, simulation orchestration, region-of-attraction sweeps, and
//! artifact emission.

pub mod config;
pub mod plot;
pub mod roa;
pub mod scenario;

use thiserror::Error;

/// Top-level failures, mapped onto process exit codes by the binary.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or unreadable configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed in a way that prevented completion
    /// (exit code 3).
    #[error("numerical failure: {0}")]
    Numerical(#[from] pcac_core::Error),

    /// The simulated state left the representable range (exit code 3).
    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    /// Filesystem problem while writing artifacts (exit code 3).
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}
