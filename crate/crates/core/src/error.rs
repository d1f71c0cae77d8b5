use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the reconstruction pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid angular range: {0}")]
    Range(String),

    #[error("missing input {path}")]
    MissingInput { path: PathBuf },

    #[error("malformed sidecar {path}: {reason}")]
    Sidecar { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput { path }
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code for the command-line front-end. Each failure class
    /// maps to its own code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::ShapeMismatch { .. } => 2,
            Error::MissingInput { .. } => 3,
            Error::Sidecar { .. } | Error::Json { .. } | Error::Csv { .. } => 4,
            Error::Range(_) => 5,
            Error::Io { .. } => 6,
        }
    }
}
