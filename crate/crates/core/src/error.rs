use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// JSON decoding failure; `locus` names the file (and line for JSON Lines input).
    #[error("parse error in {locus}: {source}")]
    Json {
        locus: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed XML: {0}")]
    Xml(String),

    /// A value failed validation while loading a file.
    #[error("load error at {locus}: {message}")]
    Load { locus: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("no positive references for paper {0}")]
    NoPositives(String),

    #[error("score tables cover different keys; only in first: {only_first:?}; only in other: {only_other:?}")]
    KeyMismatch {
        only_first: Vec<(String, String)>,
        only_other: Vec<(String, String)>,
    },

    #[error("labeled paper {0} is not covered by the score table")]
    UncoveredPaper(String),

    #[error("missing embedding for paper {paper_id} node {node_index}")]
    MissingEmbedding { paper_id: String, node_index: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(locus: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            locus: locus.into(),
            source,
        }
    }

    pub(crate) fn load(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Load {
            locus: locus.into(),
            message: message.into(),
        }
    }
}
