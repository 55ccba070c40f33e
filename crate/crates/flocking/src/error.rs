//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument combination, detected before any
    /// stepping happens.
    #[error("configuration error: {0}")]
    Config(String),

    /// A mathematically invalid input (negative radius, empty sample, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// API misuse, e.g. a stochastic kernel evaluated without a parameter.
    #[error("usage error: {0}")]
    Usage(String),

    /// Non-finite values produced while integrating.
    #[error("numerical failure at step {step}: {msg}")]
    Numerical { step: usize, msg: String },

    /// Two histograms live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn numerical(step: usize, msg: impl Into<String>) -> Self {
        Error::Numerical {
            step,
            msg: msg.into(),
        }
    }

    /// Attach the loop step index to a numerical failure raised inside a
    /// stepper, which does not know it.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::Numerical { msg, .. } => Error::Numerical { step, msg },
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Domain(_) => 2,
            Error::Numerical { .. } => 3,
            _ => 1,
        }
    }
}
