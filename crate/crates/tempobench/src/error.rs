//! Error types shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid record at line {line} ({field}): {message}")]
    InvalidRecord {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("cycle in activity graph involving {0:?}")]
    GraphCycle(Vec<String>),

    #[error("unknown action id {0}")]
    UnknownAction(String),

    #[error("dead end while sampling a chain: got {got} of {wanted} actions after {restarts} restarts (partial chain {partial:?})")]
    ChainDeadEnd {
        wanted: usize,
        got: usize,
        restarts: usize,
        partial: Vec<String>,
    },

    #[error("pipeline stage {stage} failed (seed {seed}): {source}")]
    Stage {
        stage: &'static str,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str, seed: u64) -> Self {
        Error::Stage {
            stage,
            seed,
            source: Box::new(self),
        }
    }
}
