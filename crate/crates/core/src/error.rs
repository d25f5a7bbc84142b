use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical parameter is outside its admissible range.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("sound speed is zero; use the non-dispersive path")]
    NonDispersive,

    #[error("dimensionless frequency w = {0} lies below the surface-mode band bottom 1/sqrt(2)")]
    BelowBandBottom(f64),

    #[error("K_{order}({x}) is outside the representable range: {hint}")]
    BesselRange {
        order: u32,
        x: f64,
        hint: &'static str,
    },

    #[error("negative radicand {radicand:e} at w = {w} inside the integration domain")]
    NegativeRadicand { w: f64, radicand: f64 },

    #[error("quadrature did not converge: value {value:e}, error estimate {error_estimate:e}")]
    NotConverged { value: f64, error_estimate: f64 },

    #[error("perturbation theory invalid: gamma_g * t = {0} >= 1 (secular term dominates)")]
    SecularBreakdown(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}
