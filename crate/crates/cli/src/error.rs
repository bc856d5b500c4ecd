use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// failures, 4 for an infeasible optimization and 1 for output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub(crate) fn numeric(e: impl std::fmt::Display) -> Self {
        CliError::Numeric(e.to_string())
    }
}
