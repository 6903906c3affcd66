//! Error type shared across the crate.
//!
//! Variants are grouped by how a caller should react, and each group maps
//! onto one process exit code of the `fvsim` binary: bad input or
//! configuration (1), iterative solvers giving up (2), and numerical
//! faults such as NaNs appearing mid-evolution (3).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument violated its documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A run configuration could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An iterative solver exhausted its budget without meeting its
    /// tolerance. Carries the energy trace accumulated so far (one entry
    /// per completed half-sweep for DMRG) so callers can inspect how the
    /// iteration stalled.
    #[error("convergence failure: {message}")]
    Convergence {
        message: String,
        energy_trace: Vec<f64>,
    },

    /// A computation produced non-finite numbers or lost state norm.
    #[error("numerical fault: {0}")]
    Numerical(String),

    /// Underlying I/O failure while reading or writing run artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for an [`Error::InvalidInput`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code the `fvsim` binary reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) => 1,
            Error::Convergence { .. } => 2,
            Error::Numerical(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(Error::invalid("x").exit_code(), 1);
        assert_eq!(Error::Config("x".into()).exit_code(), 1);
        assert_eq!(
            Error::Convergence {
                message: "stalled".into(),
                energy_trace: vec![-1.0, -1.1],
            }
            .exit_code(),
            2
        );
        assert_eq!(Error::Numerical("nan".into()).exit_code(), 3);
    }

    #[test]
    fn convergence_error_keeps_trace() {
        let err = Error::Convergence {
            message: "dmrg stalled".into(),
            energy_trace: vec![-3.0, -3.5, -3.51],
        };
        match err {
            Error::Convergence { energy_trace, .. } => assert_eq!(energy_trace.len(), 3),
            _ => unreachable!(),
        }
    }
}
