use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} values, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("bias definition `{0}` is empty")]
    EmptyDefinition(String),

    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("bias definition `{0}` has no pair resolvable in the vocabulary")]
    Unresolvable(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate pool for bias `{0}`: all pool vectors are identical")]
    DegeneratePool(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
