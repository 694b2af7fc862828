use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("stencil point {point:?} leaves the patch domain (coordinate {coordinate})")]
    StencilOutOfRange { point: Vec<f64>, coordinate: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular Jacobian encountered in {0}")]
    SingularJacobian(&'static str),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("equilibrium at f = {equilibrium} is hyperbolic; no periodic family")]
    HyperbolicEquilibrium { equilibrium: f64 },

    #[error("continuation failed at parameter {parameter:?}: {reason}")]
    ContinuationFailure { parameter: Vec<f64>, reason: String },

    #[error("time step {step} failed at cell {cell}: {source}")]
    StepFailed {
        step: usize,
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
