use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("zero denominator while reducing physical parameters: {0}")]
    ZeroDenominator(&'static str),

    #[error(
        "state left the switching neighborhood at t={t}: T{axis}={value} exceeds the admissible \
         overshoot {limit}; reduce dt"
    )]
    StepTooCoarse {
        t: f64,
        axis: usize,
        value: f64,
        limit: f64,
    },

    #[error("empty ensemble")]
    EmptyEnsemble,
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
