use thiserror::Error;

/// Errors produced by the tabular MDP and DICE operations.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("MDP has no reward table")]
    MissingReward,

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("non-finite value in {context} at state {state}, action {action}")]
    NonFinite {
        context: String,
        state: usize,
        action: usize,
    },

    #[error("non-finite {what} at iteration {iteration}")]
    DivergedAt { what: String, iteration: usize },

    #[error("solver failed: {0}")]
    SolverFailure(String),

    #[error("oracle starts disagree: {0}")]
    OracleDisagreement(String),

    #[error("growth estimation degenerate: {0}")]
    DegenerateGrowth(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
