use thiserror::Error;

/// Failures raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QottoError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("omega/T_eff diverges for p_excited = {p_excited}")]
    DivergentRatio { p_excited: f64 },

    #[error("effective temperature undefined: {0}")]
    UndefinedTemperature(String),

    #[error("relative entropy diverges: reference population {reference} cannot support {state}")]
    DivergentRelativeEntropy { state: f64, reference: f64 },

    #[error(
        "quadrature did not converge at t = {t}: error estimate {estimate:e} exceeds tolerance {tolerance:e}"
    )]
    QuadratureFailure { t: f64, estimate: f64, tolerance: f64 },

    #[error(
        "TCL2 positivity breach at t = {t}: <sigma_z> = {sigma_z} (omega = {omega}, T = {temperature}, gamma = {gamma}, lambda = {lambda})"
    )]
    PositivityBreach { t: f64, sigma_z: f64, omega: f64, temperature: f64, gamma: f64, lambda: f64 },

    #[error("no crossing of x = {target} within horizon t <= {horizon} (start x = {start})")]
    NoCrossing { target: f64, start: f64, horizon: f64 },
}

impl QottoError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        QottoError::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of the numerical machinery rather than of the inputs or the physics.
    pub fn is_numerical(&self) -> bool {
        matches!(self, QottoError::QuadratureFailure { .. } | QottoError::PositivityBreach { .. })
    }

    /// True when the scenario is physically unable to produce the requested crossing.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, QottoError::NoCrossing { .. } | QottoError::UndefinedTemperature(_))
    }
}

pub type Result<T, E = QottoError> = std::result::Result<T, E>;

/// Rejects non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(QottoError::invalid(name, format!("must be positive and finite, got {value}")))
    }
}
