use std::path::PathBuf;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {0} is negative")]
    NegativeTime(f64),

    #[error("degenerate class: {0}")]
    DegenerateClass(String),

    /// Intensity (or shape density) vanishes where a log-ratio is required.
    #[error("intensity bounded-away-from-zero assumption violated at t = {t}: {detail}")]
    AssumptionViolation { t: f64, detail: String },

    #[error("window mismatch: train observed on [0, {train}], rule built for [0, {rule}]")]
    WindowMismatch { train: f64, rule: f64 },

    #[error("intensity is unbounded on [0, {0}]")]
    Unbounded(f64),

    #[error("cross-validation failed: {0}")]
    CrossValidation(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
