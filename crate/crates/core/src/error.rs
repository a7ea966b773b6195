use std::path::PathBuf;

use celetrip_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("duplicate article id {id:?} on lines {first} and {second}")]
    DuplicateArticle { id: String, first: usize, second: usize },
    #[error("gazetteer: {0}")]
    Gazetteer(String),
    #[error("graph construction: {0}")]
    Graph(String),
    #[error("training: {0}")]
    Training(String),
    #[error("invalid config field {field}: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
