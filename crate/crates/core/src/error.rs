use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("operation `{operation}` is not supported for the {model} model")]
    Unsupported {
        operation: &'static str,
        model: &'static str,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stale moment cache: fingerprint {found} does not match requested {expected}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("cache format error: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
