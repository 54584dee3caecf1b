use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no connected placement found after {attempts} attempts (radius too small for the node density?)")]
    NoConnectedPlacement { attempts: usize },

    #[error("perturbation bound {eps} must satisfy 0 <= eps < e_min = {e_min}")]
    PerturbationTooLarge { eps: f64, e_min: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph has {nodes} nodes; brute-force enumeration is limited to {limit}")]
    TooLarge { nodes: usize, limit: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
