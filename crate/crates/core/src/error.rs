use std::path::PathBuf;

use thiserror::Error;

use crate::domain::AgentId;

pub type Result<T> = std::result::Result<T, SolaError>;

#[derive(Debug, Error)]
pub enum SolaError {
    #[error("no events")]
    NoEvents,

    #[error("unsorted schedule for agent {0}")]
    UnsortedSchedule(AgentId),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty batch")]
    EmptyBatch,

    #[error("diverged: {0}")]
    NonFinite(&'static str),

    #[error("diverged at event {k}: {reason}")]
    Diverged { k: usize, reason: String },

    #[error("batch size {batch} outside 1..={available}")]
    BatchSize { batch: usize, available: usize },

    #[error("sub-unit {0} has no data")]
    EmptyShard(usize),

    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("agent {selected} selected at event {k} but the event belongs to agent {owner}")]
    NotOwner {
        k: usize,
        selected: AgentId,
        owner: AgentId,
    },

    #[error("invalid window ({k1}, {k2}) for a signal of length {len}")]
    InvalidWindow { k1: usize, k2: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not an IDX file")]
    NotIdx,

    #[error("short read")]
    ShortRead,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl SolaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SolaError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SolaError::Io {
            path: path.into(),
            source,
        }
    }
}
