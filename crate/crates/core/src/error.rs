use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // catalog
    #[error("vertex or edge type `{0}` already defined")]
    DuplicateType(String),
    #[error("bad attribute: {0}")]
    BadAttribute(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown edge type `{0}`")]
    UnknownEdgeType(String),
    #[error("attribute `{attr}` already defined on `{vtype}`")]
    DuplicateAttribute { vtype: String, attr: String },
    #[error("unknown attribute `{vtype}.{attr}`")]
    UnknownAttribute { vtype: String, attr: String },
    #[error("embedding space `{0}` already defined")]
    DuplicateSpace(String),
    #[error("unknown embedding space `{0}`")]
    UnknownSpace(String),

    // embedding compatibility and vector shape
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model mismatch: `{left}` vs `{right}`")]
    ModelMismatch { left: String, right: String },
    #[error("datatype mismatch: {left} vs {right}")]
    DatatypeMismatch { left: String, right: String },
    #[error("metric mismatch: {left} vs {right}")]
    MetricMismatch { left: String, right: String },

    // storage
    #[error("validation error: {0}")]
    Validation(String),
    #[error("write conflict on vertex {0}")]
    Conflict(String),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("no index snapshot retained at or below tid {0}")]
    SnapshotUnavailable(u64),
    #[error("transaction spans partitions {0:?}")]
    CrossPartition(Vec<usize>),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),

    // vacuum
    #[error("delta files not contiguous with snapshot: expected interval starting at {expected}, got {got}")]
    Gap { expected: u64, got: u64 },

    // language
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("runtime error in `{statement}`: {message}")]
    Runtime { statement: String, message: String },

    // distribution
    #[error("worker for partition {0} timed out")]
    WorkerTimeout(usize),
    #[error("connection error: {0}")]
    Connection(String),
    #[error("decode error: {0}")]
    Decode(String),

    // loading
    #[error("format error at record {record}: {message}")]
    Format { record: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
