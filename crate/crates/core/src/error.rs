use thiserror::Error;

pub type Result<T, E = IsacError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IsacError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{op}: argument out of domain ({reason})")]
    Domain { op: &'static str, reason: String },

    #[error("singular geometry: all base stations are collinear with the user")]
    SingularGeometry,

    #[error("unlocalizable: {0} base stations given, at least 3 are required")]
    Unlocalizable(usize),

    #[error("conditioning event has probability {0:e}, too small to condition on")]
    DegenerateCondition(f64),

    #[error("{what} evaluated to {raw}, outside [0, 1] beyond rounding")]
    ProbabilityOutOfRange { what: &'static str, raw: f64 },

    #[error("realization refused: expected point count {0:.3e} exceeds the 1e7 guard")]
    ResourceGuard(f64),
}

impl IsacError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        IsacError::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        IsacError::Domain { op, reason: reason.into() }
    }
}

/// Clamps a raw probability into `[0, 1]`, rejecting values that overshoot by
/// more than rounding noise.
pub(crate) fn checked_probability(what: &'static str, raw: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(IsacError::ProbabilityOutOfRange { what, raw });
    }
    let clamped = raw.clamp(0.0, 1.0);
    if (raw - clamped).abs() >= 1e-6 {
        return Err(IsacError::ProbabilityOutOfRange { what, raw });
    }
    Ok(clamped)
}
