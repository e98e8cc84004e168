//! Error type shared by the whole engine.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("variable table mismatch: {0}")]
    TableMismatch(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("grading violation: {0}")]
    GradingViolation(String),

    #[error("malformed atlas: {0}")]
    MalformedAtlas(String),

    #[error("malformed bundle: {0}")]
    MalformedBundle(String),

    #[error("non-invertible linear part: {0}")]
    NonInvertibleLinearPart(String),

    #[error("unsupported base map: {0}")]
    BaseMapNotSupported(String),

    #[error("cocycle precondition failed: {0}")]
    CocyclePrecondition(String),

    /// A mismatch cochain carried terms below the expected formal order,
    /// which means the embedding family it was computed from was not
    /// consistent at the previous order.
    #[error("residual below expected order: {0}")]
    ResidualTooLow(String),

    /// The coboundary (or intertwining) linear system has no solution with
    /// base-polynomial coefficients of degree <= bound.
    #[error("no solution with base-coefficient degree <= {bound}")]
    UnsolvableAtBound { bound: u32 },

    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
