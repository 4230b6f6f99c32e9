use thiserror::Error;

/// Failure raised while evaluating a function over a scalar kind.
///
/// Over intervals these mean the function could not be shown to be defined
/// and smooth on the whole input box.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GuardError {
    #[error("division by an interval containing zero")]
    DivisionByZeroInterval,
    #[error("clip breakpoint {breakpoint} lies inside the argument")]
    NonSmoothCrossing { breakpoint: f64 },
    #[error("argument outside the domain of {function}")]
    DomainError { function: &'static str },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("unknown controller `{0}`")]
    UnknownController(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("jacobian is numerically singular")]
    SingularJacobian,
    #[error("newton iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("contraction bounds failed: Y={y:e} Z0={z0:e} Z2={z2:e} r*={r_star:e}")]
    ContractionFailed { y: f64, z0: f64, z2: f64, r_star: f64 },
    #[error("smoothness could not be verified: {0}")]
    SmoothnessUnverifiable(GuardError),
    #[error("enclosure at step {step} straddles the stabilization boundary")]
    Indeterminate { step: usize },
    #[error("rigorous horizon truncated at {achieved} of {requested} steps")]
    HorizonTruncated { achieved: usize, requested: usize },
    #[error("controller has no free constants")]
    NoFreeConstants,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
