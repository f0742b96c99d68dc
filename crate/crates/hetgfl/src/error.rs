//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("row {row} has norm below 1e-12 and cannot be normalized")]
    DegenerateRow { row: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },

    #[error("edge type {etype} has no entry in the relation table of {table_len} rows")]
    UnknownEdgeType { etype: usize, table_len: usize },

    #[error("node {node} has degree zero")]
    DegreeZero { node: usize },

    #[error("missing dataset file: {path}")]
    MissingFile { path: PathBuf },

    #[error("{file}:{line}: {msg}")]
    Malformed {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("{file}:{line}: node id {id} out of range (node count {n})")]
    DanglingNode {
        file: String,
        line: usize,
        id: usize,
        n: usize,
    },

    #[error("{file}:{line}: duplicate node id {id}")]
    DuplicateNode {
        file: String,
        line: usize,
        id: usize,
    },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("stratification failed: class {class} with {count} labeled nodes cannot fill every split")]
    Stratification { class: usize, count: usize },

    #[error("feature projection for node type {node_type}: expected input dim {expected}, got {got}")]
    Projection {
        node_type: usize,
        expected: usize,
        got: usize,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("graph validation failed: {0}")]
    Graph(String),

    #[error("synthetic graph generation failed: {0}")]
    Synth(String),

    #[error("metric input invalid: {0}")]
    Metric(String),

    #[error("non-finite {what} in parameter `{name}`")]
    NonFiniteParam { what: &'static str, name: String },

    #[error("training diverged: loss not finite at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("non-finite loss during evaluation")]
    NonFiniteLoss,

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
