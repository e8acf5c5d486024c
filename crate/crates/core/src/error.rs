use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight spec: {0}")]
    InvalidWeight(String),

    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error("malformed trajectory record: {0}")]
    Record(String),

    #[error("{check}: precondition failed: {msg}")]
    Precondition { check: &'static str, msg: String },

    #[error("invalid lemma instance: {0}")]
    Lemma(String),

    #[error("walk invariant violated: {0}")]
    Invariant(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn precondition(check: &'static str, msg: impl Into<String>) -> Self {
        Error::Precondition {
            check,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
