use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands whose dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input that violates a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A probability that is undefined for the given inputs, e.g. conditioning on
    /// an event of probability zero.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computed quantity drifted further from its valid range than roundoff allows.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// Every restart of the optimizer ended at a non-finite objective value.
    #[error("optimization failed: {message}")]
    Optimization {
        message: String,
        best_value: f64,
        best_params: Vec<f64>,
    },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
