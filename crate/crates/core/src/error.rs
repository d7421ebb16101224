use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("encoder unavailable: {0}")]
    EncoderUnavailable(String),

    #[error("encoder protocol error: {0}")]
    Protocol(String),

    #[error("batch item {index} failed: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("crop count {0} is degenerate: the halving schedule needs N >= 2")]
    DegenerateN(usize),

    #[error("complexity bound violated at N={n}, M={m}: {detail}")]
    BoundViolated { n: usize, m: usize, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("failed to read image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Unwraps batch wrappers down to the error that actually happened.
    pub fn root(&self) -> &Error {
        match self {
            Error::Batch { source, .. } => source.root(),
            other => other,
        }
    }
}
