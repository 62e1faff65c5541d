use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("feature mismatch: expected {expected:?}, found {found:?}")]
    FeatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the error stems from caller-supplied inputs violating a
    /// contract (bad arguments, mismatched schemas, missing files), as opposed
    /// to an internal failure.
    pub fn is_input_contract(&self) -> bool {
        match self {
            Error::InvalidArgument(_)
            | Error::GeometryMismatch(_)
            | Error::EmptyRegion(_)
            | Error::UndefinedMetric(_)
            | Error::FeatureMismatch { .. }
            | Error::Schema(_)
            | Error::Format { .. }
            | Error::Csv(_) => true,
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            Error::Json(e) => !e.is_io(),
        }
    }
}
