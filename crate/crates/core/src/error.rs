use alloc::string::String;

/// Errors reported by the solvers and linear algebra primitives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rank {rank} outside the admissible range 1..={max}")]
    InvalidRank { rank: usize, max: usize },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid_input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn invalid_options(msg: impl Into<String>) -> Error {
    Error::InvalidOptions(msg.into())
}
