use thiserror::Error;

/// Errors produced anywhere in the multiscale pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Mesh connectivity or geometry is unusable (non-manifold edge,
    /// degenerate triangle, incompatible hierarchy).
    #[error("mesh structure: {0}")]
    Structure(String),

    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A sparse or dense factorization failed, or the solve did not reach
    /// the requested residual.
    #[error("solver failure: {message} (inertia: {positive} positive, {negative} negative, {zero} zero pivots)")]
    Solver {
        message: String,
        positive: usize,
        negative: usize,
        zero: usize,
    },

    /// The quasi-interpolation could not find a well-conditioned face pair.
    #[error("interpolation construction: {0}")]
    Construction(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),

    /// A study cell failed; carries the underlying message.
    #[error("cell failed: {0}")]
    Cell(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver {
            message: msg.into(),
            positive: 0,
            negative: 0,
            zero: 0,
        }
    }
}
