use thiserror::Error;

/// Errors raised by the model, solvers, and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario, grid, or initial-data specification is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function evaluation produced a non-finite value.
    #[error("evaluation error at t = {t}: {msg}")]
    Evaluation { t: f64, msg: String },

    /// The integrator left the region the model guarantees to be invariant.
    #[error("numerical blow-up at t = {t}: {msg}")]
    BlowUp { t: f64, msg: String },

    /// Root bracketing failed.
    #[error("no bracket: {0}")]
    NoBracket(String),

    /// A solver converged to a point that fails its residual checks.
    #[error("solver error: {0}")]
    Solver(String),

    /// A diagnostic was requested outside the regime where it applies.
    #[error("precondition not met: {0}")]
    Gate(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Evaluation { .. } | Error::BlowUp { .. } | Error::NoBracket(_) | Error::Solver(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
