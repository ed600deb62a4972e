use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("split needs at least one query per part, dataset has {queries} queries")]
    InsufficientQueries { queries: usize },

    #[error("query {query_id}: need {needed_pos} positives and {needed_neg} negatives, have {pos} and {neg}")]
    InsufficientItems {
        query_id: String,
        needed_pos: usize,
        needed_neg: usize,
        pos: usize,
        neg: usize,
    },

    #[error("need at least 2 positive vectors for SMOTE, got {0}")]
    InsufficientPositives(usize),

    #[error("non-finite loss for query {query_id} at step {step}")]
    NonFiniteLoss { query_id: String, step: usize },

    #[error("every training query was skipped ({skipped} queries)")]
    NoUsableQueries { skipped: usize },

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}
