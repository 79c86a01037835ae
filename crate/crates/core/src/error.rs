use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error")]
    Io(#[from] std::io::Error),

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error("snapshot")]
    Snapshot(#[from] crate::snapshot::SnapshotError),

    #[error("nothing to rank")]
    NothingToRank,

    #[error("gold index absent or out of bounds")]
    GoldAbsent,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    FeatureMismatch { expected: usize, actual: usize },

    #[error("entry {0} is not in the gazetteer")]
    UnknownEntry(u64),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid model file: {0}")]
    Model(String),

    #[error("json")]
    Json(#[from] serde_json::Error),
}
