use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("field is not smooth enough: {0}")]
    Smoothness(String),

    #[error("parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("field spec parse error: {0}")]
    FieldSpec(String),

    #[error("empty probe plan")]
    EmptyProbe,

    #[error("supports must be disjoint: {0}")]
    OverlappingSupports(String),

    #[error("iteration failed to converge: {0}")]
    NonConvergence(String),

    #[error("zero interpolant: the field vanishes at every grid node")]
    ZeroInterpolant,
}

pub type Result<T> = std::result::Result<T, Error>;
