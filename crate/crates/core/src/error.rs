use thiserror::Error;

/// Errors raised by the density, geometry and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or sample dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// All landmarks coincide after centering, so shape is undefined.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    /// A zonal series failed its tail test before reaching the degree cap.
    #[error(
        "series not converged after degree {degrees_used}: partial log-magnitude {partial_log_abs:.6e}, \
         relative tail {relative_tail:.3e}"
    )]
    Truncation { degrees_used: usize, partial_log_abs: f64, relative_tail: f64 },

    /// Quadrature or another numeric kernel failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The optimizer could not satisfy its stopping rule.
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    /// A per-specimen evaluation failed inside a likelihood.
    #[error("specimen '{id}': {source}")]
    Specimen { id: String, source: Box<Error> },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
