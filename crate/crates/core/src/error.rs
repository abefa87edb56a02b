use thiserror::Error;

/// Errors raised by the solver and its diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or model parameter violates its declared range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A caller broke an input contract (e.g. a non-symmetric tensor).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Data fails the admissibility requirements (e.g. non-positive temperature floor).
    #[error("inadmissible data: {0}")]
    Inadmissible(String),

    /// Assembly or factorization of a linear system failed.
    #[error("assembly error: {0}")]
    Assembly(String),

    /// The fixed-point iteration did not reach its tolerance.
    #[error(
        "picard iteration failed after {iterations} iterations (residual {residual:.3e}): {reason}"
    )]
    Picard {
        iterations: usize,
        residual: f64,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
