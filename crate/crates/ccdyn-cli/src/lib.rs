//! Command line front end: scenario configs, runners and output writers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or incomplete configuration; maps to exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// The simulation stopped early; partial output has been written.
    #[error("simulation halted: {0}")]
    Halt(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config-error",
            CliError::Halt(_) => "simulation-halt",
            CliError::Io(_) => "io-error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Halt(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
