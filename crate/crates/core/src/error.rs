use thiserror::Error;

/// Errors raised by the spectral, stepping and backward-error layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The state (or a point on a segment) left the domain of the nonlinearity.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("stage iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// `I - z a` (or a per-mode stage block) is singular or numerically so.
    #[error("pole: {0}")]
    Pole(String),

    #[error("requested order {requested} exceeds the configured cap {cap}")]
    OrderCap { requested: usize, cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("reference integrator failed: {0}")]
    Integrator(String),
}

pub type Result<T> = std::result::Result<T, Error>;
