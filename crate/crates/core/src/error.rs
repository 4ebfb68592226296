use thiserror::Error;

/// Errors raised by the footprint model and the scenario analyses.
///
/// Every variant that stems from an input names the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field}: value is not finite")]
    NonFinite { field: &'static str },

    #[error("{field}: {reason}")]
    OutOfRange {
        field: &'static str,
        reason: &'static str,
    },

    #[error("workload carries an explicit power draw; use energy_from_power")]
    ExplicitPowerWorkload,

    #[error("scaling curve: {0}")]
    InvalidCurve(String),

    #[error("comparison baseline has zero emissions; relative change is undefined")]
    ZeroBaseline,
}

impl ModelError {
    /// Name of the input field the error refers to, when there is one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            ModelError::NonFinite { field } | ModelError::OutOfRange { field, .. } => Some(field),
            ModelError::ExplicitPowerWorkload => Some("explicit_power_kw"),
            ModelError::InvalidCurve(_) => Some("curve"),
            ModelError::ZeroBaseline => None,
        }
    }
}

pub type ModelResult<T> = Result<T, ModelError>;
