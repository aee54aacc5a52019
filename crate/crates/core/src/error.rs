use thiserror::Error;

/// Errors produced by the model, spectral and dynamics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("Hilbert-space dimension {dim} exceeds the configured limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error(
        "superoperator dimension {dim} exceeds the dense solver limit {limit}; \
         use the closed-form roots and combinational spectrum instead"
    )]
    DenseTooLarge { dim: usize, limit: usize },

    #[error("root finding did not converge: worst residual {residual:e} (allowed {allowed:e})")]
    RootResidual { residual: f64, allowed: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("spectral gap undefined: no root has a negative real part")]
    GapUndefined,

    #[error("steady state is not unique: null space has dimension {0}")]
    Multiplicity(usize),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("trajectories are not comparable: {0}")]
    Incomparable(String),

    #[error("no exceptional point on the scan line: {0}")]
    NotFound(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
