//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible dimensions between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// An input violated a documented precondition (e.g. non-Hermitian
    /// matrix passed to a Hermitian eigensolver).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A dense decomposition did not converge.
    #[error("decomposition failed on {rows}x{cols} matrix: {detail}")]
    Decomposition {
        rows: usize,
        cols: usize,
        detail: String,
    },
    /// A configured size cap would be exceeded.
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid parameter combination.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Iterative solver failure.
    #[error("solver error: {0}")]
    Solver(String),
    /// A construction procedure failed partway (e.g. norm collapse).
    #[error("construction failed: {0}")]
    Construction(String),
    /// Index out of range.
    #[error("index error: {0}")]
    Index(String),
    /// An internal invariant that should hold by construction was violated.
    #[error("internal invariant violated: {0}")]
    Internal(String),
    /// I/O or serialization failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
