use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("degenerate simplex: linear solve singular beyond tolerance")]
    DegenerateSimplex,

    #[error("degenerate input: fewer than d+1 affinely independent sites")]
    DegenerateInput,

    #[error("general position violated beyond tolerance recovery: {0}")]
    GeneralPositionViolation(String),

    #[error("duplicate site at index {0}")]
    DuplicateSite(usize),

    #[error("infeasible quantizer level: requested {requested}, only {distinct} distinct points")]
    InfeasibleLevel { requested: usize, distinct: usize },

    #[error("friend preprocessing is limited to dimension <= 7, got {0}")]
    DimensionTooHigh(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed dataset file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
