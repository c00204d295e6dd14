//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Parse failure at a known line of a text file (manifests, headers).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A file is structurally readable but violates its schema.
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("class {0} is absent from the holdout set; importance weights are unidentifiable")]
    MissingClass(usize),

    #[error("confusion system is numerically rank-deficient (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("non-finite loss or gradient at fine-tune iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("detected domain {0:?} is not present in the registry")]
    UnknownDomain(String),

    #[error("model is incompatible: expected dimension {expected}, got {actual}")]
    IncompatibleModel { expected: usize, actual: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
