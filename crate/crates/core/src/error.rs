use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample stream exhausted after {completed} iterations")]
    StreamExhausted { completed: u64 },

    #[error("leading singular pair is unidentifiable: eigengap {gap:e} is below tolerance")]
    Unidentifiable { gap: f64 },

    #[error("point is not stationary: KKT residual {residual:e}")]
    NotStationary { residual: f64 },

    #[error("step size too large: requires {0}")]
    StepSizeTooLarge(String),

    #[error("{routine} did not converge after {sweeps} sweeps")]
    NoConvergence { routine: &'static str, sweeps: usize },

    #[error("covariance is indefinite: smallest eigenvalue {min_eig:e}")]
    Indefinite { min_eig: f64 },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("row count mismatch: {path_x} has {rows_x} rows, {path_y} has {rows_y} rows")]
    RowCountMismatch {
        path_x: String,
        rows_x: usize,
        path_y: String,
        rows_y: usize,
    },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            got,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
