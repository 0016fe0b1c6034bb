use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GqeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GqeError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Zero-norm vector reached a cosine score, or a node has no active features.
    #[error("degenerate value: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid query: {}", .0.join("; "))]
    InvalidQuery(Vec<String>),

    #[error("sampling infeasible for structure {structure} after {attempts} attempts")]
    SamplingInfeasible { structure: String, attempts: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("missing input {}: {hint}", .path.display())]
    MissingInput { path: PathBuf, hint: String },

    #[error("{0} is locked by another process")]
    Locked(PathBuf),

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GqeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GqeError::Io {
            path: path.into(),
            source,
        }
    }
}
