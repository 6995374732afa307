use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by every module of the crate.
///
/// Variants split into two families: data/validation failures (bad input files,
/// broken invariants) and external-service failures (the remote scorer). The
/// CLI maps the two families onto distinct exit codes, see [`Error::is_external`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate pair ({question_id}, {passage_id})")]
    DuplicatePair {
        question_id: String,
        passage_id: String,
    },

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: index has {expected}, query has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("remote scorer failed after {attempts} attempts: {message}")]
    Remote { attempts: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    /// True when the failure originates outside this process (remote scorer).
    pub fn is_external(&self) -> bool {
        matches!(self, Error::Remote { .. })
    }
}
