//! Command implementations behind the `zsltl` binary.
//!
//! Every command reads its inputs without modifying them and writes outputs
//! through a temporary file and rename, so reruns with the same inputs and
//! seed produce byte-identical artifacts.

pub mod commands;
pub mod config;
pub mod svg;

use thiserror::Error;
use zsltl::exec::ExecError;
use zsltl::ltl::LtlError;
use zsltl::train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("specification error: {0}")]
    Spec(String),
    #[error("{0}")]
    NonFinite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => 2,
            CliError::NonFinite(_) => 3,
            CliError::Config(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<LtlError> for CliError {
    fn from(e: LtlError) -> Self {
        CliError::Spec(e.to_string())
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::Parse(_) | ExecError::UnknownPropositions(_) => CliError::Spec(e.to_string()),
            ExecError::Env(_) | ExecError::Empty => CliError::Config(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::NonFinite(e.to_string()),
            TrainError::Io(io) => CliError::Io(io),
            _ => CliError::Config(e.to_string()),
        }
    }
}
