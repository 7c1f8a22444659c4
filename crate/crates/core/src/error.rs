//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A manifold or kernel specification is internally inconsistent.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// The operation is well-posed but has no implementation for the given
    /// inputs (e.g. analytic spectra of mesh point clouds).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A triangle mesh is unusable (out-of-range indices, no usable faces).
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// Malformed text input, with the 1-based line number of the offence.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
