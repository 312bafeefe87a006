use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("store is empty")]
    EmptyStore,

    #[error("vector {id} is not unit-normalized (norm {norm})")]
    NotNormalized { id: usize, norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("unknown routing mode `{0}`")]
    UnknownMode(String),

    #[error("malformed {kind} data: {reason}")]
    Format { kind: &'static str, reason: String },

    #[error("index does not match store: {0}")]
    StoreMismatch(String),

    #[error("angle profile is empty")]
    EmptyProfile,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn format(kind: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            kind,
            reason: reason.into(),
        }
    }
}
