//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values in field '{0}'")]
    NonFinite(String),

    #[error("snapshot i/o: {0}")]
    SnapshotIo(String),

    #[error("snapshot manifest: {0}")]
    SnapshotManifest(String),
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::SnapshotIo(e.to_string())
    }
}
