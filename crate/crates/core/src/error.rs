use std::path::PathBuf;

/// Errors produced by dump I/O, configuration validation, and the pruning
/// kernels. Display strings are stable: the CLI and tests match on them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported dtype {dtype:?} for tensor {name}")]
    UnsupportedDtype { name: String, dtype: String },

    #[error("truncated payload for tensor {name}")]
    TruncatedPayload { name: String },

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("candidate pool too small: need {need}, have {have}")]
    CandidatePoolTooSmall { need: usize, have: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
