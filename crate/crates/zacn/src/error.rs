//! Failure types shared across the crate.

use std::path::Path;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a domain precondition (non-positive depth, bad label, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Too little or rank-deficient data for a geometric fit.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Tensor/field dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A file failed to parse; `offset` is the byte position of the failure.
    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    /// Training produced a non-finite loss.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn format(path: &Path, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.display().to_string(),
            offset,
            message: msg.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
