use std::path::Path;

use thiserror::Error;

use crate::format::LineError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("format: {0}")]
    Format(String),
    #[error("{path}: {} malformed line(s): {}", errors.len(), errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Lines {
        path: String,
        errors: Vec<LineError>,
    },
    #[error(transparent)]
    Core(#[from] irlc_core::Error),
    /// A result violated an invariant the library guarantees.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 2 for configuration, IO and input errors; 3 for invariant violations
    /// and solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) | CliError::Core(irlc_core::Error::Solver(_)) => 3,
            _ => 2,
        }
    }
}
