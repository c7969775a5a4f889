use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid does not resolve the kernel: {0}")]
    InsufficientResolution(String),

    #[error("kernel {0} is not function-valued in this dimension")]
    NotFunctionValued(String),

    #[error("displacement propagator is only defined for the viscous wave family")]
    UnsupportedKind,

    #[error("fit window is empty")]
    FitWindowEmpty,

    #[error("adaptedness violation: {0}")]
    AdaptednessViolation(String),

    #[error("non-finite solver state at t = {time} (replicate {replicate})")]
    NonFiniteState { time: f64, replicate: usize },

    #[error("the zero mode has no Neumann-to-Dirichlet image")]
    DegenerateMode,

    #[error("admissibility test inconclusive: {0}")]
    Inconclusive(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("insufficient lag span: {0}")]
    InsufficientLagSpan(String),

    #[error("field shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
