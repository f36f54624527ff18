use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("edge ({0}, {0}) is a self-loop; self-loops are set through flags, not edges")]
    SelfLoopEdge(usize),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("walk length {0} unsupported (expected 1..=4)")]
    WalkLength(usize),

    #[error("invalid generator parameters: {0}")]
    Generator(String),

    #[error("invalid estimand: {0}")]
    Estimand(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid ordering: {0}")]
    Ordering(String),

    #[error("invalid design parameters: {0}")]
    Params(String),

    #[error("positivity violation: unit {unit} realized exposure e{contrast} with recorded probability 0")]
    Positivity { unit: usize, contrast: u8 },

    #[error("oracle enumeration limited to n <= {max}, got n = {n}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
