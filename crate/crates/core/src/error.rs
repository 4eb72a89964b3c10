//! Crate-wide error type. Every refused precondition maps to one variant;
//! numerical routines never silently degrade (no aliasing, no truncated
//! sums standing in for refused configurations).

use thiserror::Error;

/// Errors surfaced by construction and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature grid cannot represent the requested degree exactly.
    #[error("grid supports degree {supported} but degree {requested} was requested; refusing to alias")]
    GridTooCoarse { supported: usize, requested: usize },

    /// Structurally invalid input (wrong lengths, negative variances, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Configuration that the requested algorithm cannot honor.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Duplicate (ell, m) row in a coefficient file.
    #[error("duplicate coefficient entry for ell={ell}, m={m}")]
    DuplicateEntry { ell: usize, m: isize },

    /// Malformed record in an input file.
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
