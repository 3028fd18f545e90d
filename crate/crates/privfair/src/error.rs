use std::path::PathBuf;

use privfair_core::engine::EngineError;
use privfair_core::nav::NavError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("{context}: {source}")]
    Model { context: String, source: privfair_core::Error },
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid {field}: {message}")]
    Config { field: String, message: String },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub trait ModelContext<T> {
    fn context(self, what: impl Into<String>) -> Result<T, Error>;
}

impl<T> ModelContext<T> for Result<T, privfair_core::Error> {
    fn context(self, what: impl Into<String>) -> Result<T, Error> {
        self.map_err(|source| Error::Model { context: what.into(), source })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
