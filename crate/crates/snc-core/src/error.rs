use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid bounding function: {0}")]
    InvalidBounding(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("improper bounding function: tail does not vanish at infinity")]
    ImproperTail,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },

    #[error("trace format error at row {row}: {msg}")]
    TraceFormat { row: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
