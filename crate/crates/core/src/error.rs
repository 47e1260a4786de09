use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid display profile: {0}")]
    InvalidProfile(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// Malformed scene data. `record` names the offending point when known.
    #[error("scene error{}: {message}", record.map(|r| format!(" at record {r}")).unwrap_or_default())]
    Scene {
        record: Option<usize>,
        message: String,
    },

    #[error("cache error: {0}")]
    Cache(String),

    #[error("pose file error: {0}")]
    Poses(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] ::image::ImageError),
}

impl Error {
    pub(crate) fn scene(record: Option<usize>, message: impl Into<String>) -> Self {
        Error::Scene {
            record,
            message: message.into(),
        }
    }

    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad invocation rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}
