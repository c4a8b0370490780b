use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or mismatched image data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric parameter outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A computation refused or failed for lack of resources (size caps,
    /// factorization failures).
    #[error("resource error: {0}")]
    Resource(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
