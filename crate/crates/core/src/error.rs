use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("matrix is not symmetric: |M[{row},{col}] - M[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix dimension {dim} exceeds the configured cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("linear system is singular or not positive definite")]
    Singular,

    #[error("requested {requested} new edges but only {available} non-edges exist")]
    InsufficientNonEdges { requested: usize, available: usize },

    #[error("non-finite {what} at epoch {epoch}, {phase} step {step}")]
    NonFinite {
        what: String,
        phase: &'static str,
        epoch: usize,
        step: usize,
        /// Traces recorded before the failure.
        report: Box<crate::train::LossReport>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integrity check failed for {file}: {reason}")]
    Integrity { file: PathBuf, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
