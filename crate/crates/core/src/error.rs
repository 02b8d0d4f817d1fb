use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The potential is too large for the first-order graph map to be trusted.
    #[error("graph regime violated: max r^-1|df| = {max:.6e} exceeds {limit}")]
    Regime { max: f64, limit: f64 },

    #[error("region error: {0}")]
    Region(String),

    #[error("degenerate tangent frame: {0}")]
    Frame(String),

    #[error("quadrature did not reach the requested accuracy (estimate {estimate:.3e}, requested {requested:.3e})")]
    Accuracy { estimate: f64, requested: f64 },

    /// Outside the scope the toolkit supports, e.g. a non-rigid link in the
    /// rotation-extraction step.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
}
