use thiserror::Error;

/// Errors raised by the library. Each variant maps to a contract class that
/// the CLI turns into an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("truncation: tail population {tail:.3e} exceeds tolerance {tol:.1e} at dim {dim}")]
    Truncation { tail: f64, tol: f64, dim: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("convention mismatch: {0}")]
    Convention(String),

    #[error("numerical integrity: {0}")]
    Integrity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
