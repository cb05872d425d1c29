use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{solver} did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("malformed model: {0}")]
    Model(String),

    #[error("schema fingerprint mismatch: model has {expected}, data has {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("all candidate fits failed: {0}")]
    AllFitsFailed(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numeric machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Singular(_) | Error::NonConvergence { .. } | Error::AllFitsFailed(_)
        )
    }
}
