//! Config-driven experiment runner: JSON configs in, JSON/CSV tables out.
//!
//! Every subcommand is a pure function from a validated [`ExperimentConfig`]
//! to a list of [`Artifact`]s; only the caller touches the file system.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod execute;
pub mod output;
pub mod sweep;

pub use config::{parse_config, parse_sweep, validate, ExperimentConfig};
pub use execute::{run_command, Artifact, AssertCheck, Command, Outcome};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("acceptance check failed: {0}")]
    Assertion(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema { .. } | CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Assertion(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

pub(crate) fn numerical(context: &str, e: spreadlab::Error) -> CliError {
    CliError::Numerical(format!("{context}: {e}"))
}
