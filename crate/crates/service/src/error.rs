use std::path::PathBuf;

use mission_core::engine::{EngineError, SessionStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {id} is {status}, not active")]
    SessionNotActive { id: String, status: SessionStatus },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{file}: line {line}: {message}")]
    ScriptParse { file: String, line: usize, message: String },
    #[error(transparent)]
    Engine(EngineError),
}

impl ServiceError {
    pub fn io(path: impl Into<PathBuf>, e: std::io::Error) -> Self {
        Self::Io { path: path.into(), message: e.to_string() }
    }

    /// Maps engine errors that concern a particular session onto service errors.
    pub fn from_engine(id: &str, e: EngineError) -> Self {
        match e {
            EngineError::SessionNotActive(status) => Self::SessionNotActive { id: id.to_string(), status },
            other => Self::Engine(other),
        }
    }
}

impl From<EngineError> for ServiceError {
    fn from(e: EngineError) -> Self {
        Self::Engine(e)
    }
}
