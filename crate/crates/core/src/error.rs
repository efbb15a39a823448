use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{0}` is assigned more than one role")]
    OverlappingRoles(String),

    #[error("attribute index {index} out of range for {len} attributes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("privacy budget exceeded: spent rho = {spent}, budget = {budget}")]
    BudgetExceeded { spent: f64, budget: f64 },

    #[error("search guard tripped: {0}")]
    GuardTripped(String),

    #[error("no candidate edge joins two components")]
    NoCandidateEdge,

    #[error("edge set is not a spanning tree: {0}")]
    NotSpanning(String),

    #[error("invalid 3-SAT instance: {0}")]
    Sat(String),

    #[error("reduction error: {0}")]
    Reduction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
