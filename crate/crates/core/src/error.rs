use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    /// Boundary data or neighbouring lines leave no admissible configuration.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("cost guard: estimated {estimate:.3e} operations exceeds limit {limit:.3e}")]
    CostGuard { estimate: f64, limit: f64 },

    #[error("space cutoff too small: boundary mass {mass:.3e} exceeds {tolerance:.1e}")]
    Cutoff { mass: f64, tolerance: f64 },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("insufficient effective sample size: {ess:.1} < {required:.1}")]
    InsufficientEss { ess: f64, required: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
