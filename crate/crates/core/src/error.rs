use thiserror::Error;

use crate::magnonics::ModeKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value {value} for `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("field angle {theta} rad does not excite {expected:?} modes")]
    WrongModeFamily { theta: f64, expected: ModeKind },

    #[error("field angle {theta} rad is not one of 0, pi/2, pi, 3pi/2")]
    UnsupportedGeometry { theta: f64 },

    #[error("finite difference undefined at the grid boundary k = {k}")]
    Boundary { k: f64 },

    #[error("point (x = {x_um} um, z = {z_nm} nm) lies inside the antenna conductor")]
    InsideConductor { x_um: f64, z_nm: f64 },

    #[error("grid `{name}` must be non-empty, finite and sorted ascending")]
    UnsortedGrid { name: &'static str },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no orientation with matching transitions; scanned residuals (theta_rad, residual_mhz): {residuals:?}")]
    OrientationNotFound { residuals: Vec<(f64, f64)> },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit did not converge after {iterations} iterations; residual history {history:?}")]
    NonConvergence { iterations: usize, history: Vec<f64> },

    #[error("configuration error: {0}")]
    Configuration(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
