use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by domain-type construction and configuration loading.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("project description is empty")]
    EmptyProjectDescription,

    #[error("module name is empty")]
    EmptyModuleName,

    #[error("finalized code for module `{0}` is empty")]
    EmptyFinalizedCode(String),

    #[error("review for module `{0}` is empty")]
    EmptyReview(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("failed to parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
