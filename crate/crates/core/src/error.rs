use thiserror::Error;

/// Errors raised by the simulation stack.
///
/// Variants split into two families: input problems (bad arguments, malformed
/// files, grid mismatches) and physics failures (no guided mode, solver
/// non-convergence). [`Error::is_physics`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("field has zero power")]
    ZeroPower,

    #[error("mode not contained in grid: {0}")]
    NotContained(String),

    #[error("no guided mode: beta^2 = {beta_sq:.9e} <= cladding cutoff {cutoff:.9e}")]
    Cutoff { beta_sq: f64, cutoff: f64 },

    #[error("eigen solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("calibration did not converge after {} evaluations (residual {:.3e})", .0.evaluations, .0.residual)]
    CalibrationNotConverged(Box<crate::calibration::Calibration>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the physical model rather than of the caller.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::Cutoff { .. }
                | Error::NotConverged { .. }
                | Error::NotContained(_)
                | Error::CalibrationNotConverged(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
