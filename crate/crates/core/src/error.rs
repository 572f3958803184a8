use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or extents are incompatible with the requested operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// An unknown name or an out-of-range setting.
    #[error("configuration error: {0}")]
    Config(String),

    /// A library operation produced NaN or infinity.
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    /// A numerical property (perfect reconstruction, adjointness, ...) did not hold.
    #[error("verification failed: {0}")]
    Verification(String),

    /// A degenerate input for a statistical estimator.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
