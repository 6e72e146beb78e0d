use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A measurement or operator violates its validity constraints.
    #[error("invalid measurement: {0}")]
    Validity(String),

    /// Effects do not sum to the identity.
    #[error("incomplete measurement: completeness defect {defect:.3e} exceeds {tol:.1e}")]
    Completeness { defect: f64, tol: f64 },

    /// Dimensions, outcome shapes or axes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A function was called outside the domain where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
