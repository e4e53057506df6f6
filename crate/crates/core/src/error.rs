use crate::cost::CostVector;

/// Errors raised by the solvers and problem backends.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// No policy meets the constraint bounds, even at the largest multiplier tried.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The oracle's constraint value increased with the multiplier, which an
    /// exact Lagrangian minimizer cannot do.
    #[error(
        "non-monotone oracle: c1({lambda_low}) = {risk_low} < c1({lambda_high}) = {risk_high}"
    )]
    NonMonotoneOracle {
        lambda_low: f64,
        lambda_high: f64,
        risk_low: f64,
        risk_high: f64,
    },

    /// The recovery LP over the candidate pool has no solution. The pool is
    /// too small; re-query the oracle near the dual optimum.
    #[error("mixture not recoverable from a pool of {} candidates", pool.len())]
    MixtureNotRecoverable { pool: Vec<CostVector> },

    /// Both bracket endpoints carry the same constraint value and it differs
    /// from the bound.
    #[error("degenerate subgradient: {0}")]
    Degenerate(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    /// The mean trajectory of a plan enters an obstacle, which breaks the
    /// conservative risk approximation.
    #[error("mean state enters obstacle {obstacle} at step {step}")]
    MeanInsideObstacle { obstacle: usize, step: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
