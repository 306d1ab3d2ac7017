use thiserror::Error;

/// Errors produced by the simulation and analysis kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain its operation accepts.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Sampling grid cannot represent the requested pulse.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// Integration step violates the resolution bound set by one of the rates.
    #[error("step size {dt_ps} ps exceeds the {max_dt_ps:.4} ps bound set by {limiting}")]
    StepSize {
        limiting: &'static str,
        dt_ps: f64,
        max_dt_ps: f64,
    },

    /// A normalising quantity vanished (zero mean, zero side-peak area, ...).
    #[error("undefined result: {0}")]
    Undefined(String),

    /// A fit could not be carried out on the supplied data.
    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
