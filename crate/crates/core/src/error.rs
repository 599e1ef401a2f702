use std::path::PathBuf;

use thiserror::Error;

use crate::unlearn::Trace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("state error: {0}")]
    State(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error at step {step}: {msg}")]
    Numeric { step: usize, msg: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("budget exceeded: {what} spent {spent:.6} > limit {limit:.6}")]
    Budget {
        what: &'static str,
        spent: f64,
        limit: f64,
        trace: Box<Trace>,
    },
    #[error("cannot resolve {what} at {path}")]
    Resolution { what: &'static str, path: PathBuf },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Configuration-class failures: bad inputs the caller can fix.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Shape(_) | Error::Resolution { .. } | Error::InsufficientData(_)
        )
    }
}
