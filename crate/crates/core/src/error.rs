use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit reports.
///
/// `Precondition` is reserved for violated estimator hypotheses (the CLI maps it
/// to exit code 3); everything a caller could fix by passing different input
/// is `InvalidInput`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {hypothesis} ({detail})")]
    Precondition {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn precondition(hypothesis: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            hypothesis,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
