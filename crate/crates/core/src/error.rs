use thiserror::Error;

/// Errors produced by game, strategy, chain and relation operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible tensor at history {history}, action {action}: {detail}")]
    InfeasibleTensor {
        history: String,
        action: usize,
        detail: String,
    },

    #[error("infeasible ZD construction: {0}")]
    InfeasibleZd(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownBuiltin(String),

    #[error("capacity exceeded: {entries} tensor entries (limit {limit})")]
    Capacity { entries: u128, limit: u128 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("power iteration did not converge after {iterations} iterations (last change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("trivial relation: {0}")]
    TrivialRelation(String),
}

pub type Result<T> = std::result::Result<T, ZdError>;
