use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator.
///
/// `Config` and `Trace` are user-input problems; `Internal` means a simulation
/// invariant broke and the run cannot be trusted.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid trace: {0}")]
    Trace(String),

    #[error("cannot compare reports: {0}")]
    Comparison(String),

    #[error("advance() called on an empty event queue")]
    EmptyEventQueue,

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
