use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid (memory capacity, logical complexity) combination ({mc}, {lc})")]
    InvalidCombination { mc: u8, lc: u8 },

    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("world cannot support a difficulty-{difficulty} question: {reason}")]
    InsufficientWorld { difficulty: u8, reason: String },

    #[error("question {qid} cannot be resolved from its facts: {reason}")]
    Unsolvable { qid: String, reason: String },

    #[error("split '{split}' would receive no episodes")]
    DegenerateSplit { split: &'static str },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("unknown ablation variant '{0}'")]
    UnknownVariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            locus: locus.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
