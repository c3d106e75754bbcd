//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by mesh generation, assembly, solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (unsupported angle, bad level
    /// range, malformed CLI input). Maps to exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// A requested mesh would exceed the configured size limits.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Element-level assembly failure (degenerate geometry).
    #[error("assembly error: {0}")]
    Assembly(String),

    /// An iterative solver ran out of iterations.
    #[error("solver failed to converge: {0}")]
    Convergence(String),

    /// The manufactured-solution self-check found a discrepancy between
    /// closed-form derivatives and their finite-difference oracles.
    #[error("manufactured-solution self-check failed: {0}")]
    Oracle(String),

    /// CSV or mesh-dump I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration errors,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
