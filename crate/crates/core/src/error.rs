use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the graph, data, solver and network layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("adjacency matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {gap:e}")]
    Asymmetric { row: usize, col: usize, gap: f64 },

    #[error("invalid adjacency entry at ({row},{col}): {reason}")]
    InvalidAdjacency {
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("node {node} is isolated (zero degree)")]
    IsolatedNode { node: usize },

    #[error("filter order {order} out of range 1..={max}")]
    OrderOutOfRange { order: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("filter is not invertible: min |h_i| = {min:e}, max |h_i| = {max:e}")]
    NonInvertibleFilter { min: f64, max: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no connected graph found after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("degenerate filter draw: ||e1 + phi b||_1 stayed below 1e-12")]
    DegenerateFilter,

    #[error("{total} signals cannot be split into batches of {batch}")]
    NotDivisible { total: usize, batch: usize },

    #[error("edge list line {line}: {reason}")]
    EdgeList { line: usize, reason: String },

    #[error("report {path}: {reason}")]
    Report { path: PathBuf, reason: String },

    #[error("unsupported format_version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt payload {path}: expected {expected} bytes, found {found}")]
    CorruptPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("negative threshold {0}")]
    NegativeThreshold(f64),

    #[error("Woodbury capacitance matrix is singular")]
    SingularCapacitance,

    #[error("diagonal entry z[{index}] = {value:e} is not positive and flooring is disabled")]
    ZeroDiagonal { index: usize, value: f64 },

    #[error("reference has zero norm")]
    ZeroTarget,

    #[error("zero vector passed to alignment")]
    ZeroVector,

    #[error("trace was recorded at model version {trace}, model is at version {model}")]
    StaleTrace { trace: u64, model: u64 },

    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
