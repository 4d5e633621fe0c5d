use thiserror::Error;

/// Errors raised by the library. Each variant maps to one class of contract
/// violation so callers (the CLI in particular) can pick an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("capacity exceeded: {size} points, limit is {limit}")]
    Capacity { size: usize, limit: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{count} prominent minima are not divisible by N = {n}")]
    Inconsistent { count: usize, n: usize },
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
