//! Error type and process exit codes.
//!
//! Exit code 0 means success, 2 an input or configuration problem, and 3 a
//! numerical failure during training.

use std::path::Path;

use tailgame_core::Error as CoreError;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration value, malformed input file, or missing file.
    #[error("{0}")]
    Input(String),
    /// Training left the finite range.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::NumericalDivergence => CliError::Numerical(err.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Wraps an IO error with the path it happened on.
pub fn io_error(path: &Path, err: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {err}", path.display()))
}

pub type Result<T> = std::result::Result<T, CliError>;
