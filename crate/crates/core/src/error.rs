//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by tree construction, solvers and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Structurally invalid input (bad tree, wrong lengths, non-finite data).
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A request that is well formed but outside what the solver will attempt.
    #[error("refused: {0}")]
    Refused(String),
    /// Two objects that must share a tree or horizon do not.
    #[error("mismatch: {0}")]
    Mismatch(String),
    /// A numerical routine did not reach its target.
    #[error("not converged: {0}")]
    NotConverged(String),
    /// A monotone iteration produced an out-of-order pair.
    #[error("order violation: {0}")]
    OrderViolation(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
