use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label {raw:?} is empty after normalization")]
    Normalization { raw: String },

    /// A record violates a structural rule. `records` names every offender.
    #[error("{message}: {}", records.join(", "))]
    Validation {
        message: String,
        records: Vec<String>,
    },

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// Labels that have no vector in the embedding store, sorted and deduplicated.
    #[error("missing embeddings for {} label(s): {}", labels.len(), labels.join(", "))]
    MissingEmbedding { labels: Vec<String> },

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no labeled ground truth")]
    NoLabeledGroundTruth,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>, records: Vec<String>) -> Self {
        Error::Validation {
            message: message.into(),
            records,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the inputs (bad files, bad flags) rather than
    /// by a broken internal guarantee.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}
