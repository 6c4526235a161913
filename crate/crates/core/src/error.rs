use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix exponential failed: {0}")]
    Exponential(String),

    #[error("singular linear system while solving for the steady state")]
    SingularSystem,

    #[error("no unique periodic steady state: null space of (U - I) has dimension {dim}")]
    NoUniqueSteadyState { dim: usize },

    #[error("spectrum is flat: peak-to-peak {peak_to_peak:e} at every phase")]
    FlatSpectrum { peak_to_peak: f64 },

    #[error("N refinement did not converge by N = {n_max} (last relative change {rel_change:e})")]
    NotConverged { n_max: usize, rel_change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    require_finite(name, value)?;
    if value < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be >= 0, got {value}"),
        });
    }
    Ok(())
}
