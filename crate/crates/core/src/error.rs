use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistillError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// The pre-normalization success probability of a recurrence step vanished.
    #[error("degenerate input: success probability is zero")]
    ZeroSuccess,

    #[error("no convergence after {iterations} iterations (last step {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("root bracket [{lo}, {hi}] does not enclose a sign change")]
    Bracket { lo: f64, hi: f64 },

    /// The channel output fidelity does not exceed the distillation threshold.
    #[error("undistillable: β = {beta} does not exceed the threshold {threshold}")]
    Undistillable { beta: f64, threshold: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, DistillError>;
