//! Falcon parameter sets: the sigma bounds that SamplerZ inherits.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Standard deviation of the base half-Gaussian. The RCDT and the
/// `z0^2/(2*sigma_max^2)` lookup table are built for this value, so it is a
/// design-time constant rather than a per-set parameter.
pub const SIGMA_MAX: f64 = 1.8205;

/// Lower sigma bound for Falcon-512 (from the reference implementation).
pub const SIGMA_MIN_512: f64 = 1.2778336969128337;

/// Lower sigma bound for Falcon-1024.
pub const SIGMA_MIN_1024: f64 = 1.2982803343442918;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSet {
    Falcon512,
    Falcon1024,
    Custom,
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSet::Falcon512 => write!(f, "falcon512"),
            ParamSet::Falcon1024 => write!(f, "falcon1024"),
            ParamSet::Custom => write!(f, "custom"),
        }
    }
}

/// Sigma bounds for a sampling campaign. `sigma_prime` of every task must lie
/// in `[sigma_min, sigma_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub set: ParamSet,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamsError {
    /// sigma bounds are not `0 < sigma_min < sigma_max <= SIGMA_MAX`.
    InvalidBounds { sigma_min: f64, sigma_max: f64 },
}

impl fmt::Display for ParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamsError::InvalidBounds {
                sigma_min,
                sigma_max,
            } => write!(
                f,
                "invalid sigma bounds: need 1 <= sigma_min < sigma_max <= {SIGMA_MAX}, \
                 got [{sigma_min}, {sigma_max}]"
            ),
        }
    }
}

impl std::error::Error for ParamsError {}

impl SamplerParams {
    pub fn falcon512() -> Self {
        SamplerParams {
            set: ParamSet::Falcon512,
            sigma_min: SIGMA_MIN_512,
            sigma_max: SIGMA_MAX,
        }
    }

    pub fn falcon1024() -> Self {
        SamplerParams {
            set: ParamSet::Falcon1024,
            sigma_min: SIGMA_MIN_1024,
            sigma_max: SIGMA_MAX,
        }
    }

    /// Custom bounds. The upper bound may not exceed [`SIGMA_MAX`]: the base
    /// sampler's table is built for that sigma and the rejection exponent
    /// `(z-r)^2/(2 sigma'^2) - z0^2/(2 sigma_max^2)` would go negative beyond it.
    pub fn custom(sigma_min: f64, sigma_max: f64) -> Result<Self, ParamsError> {
        if !(sigma_min.is_finite() && sigma_max.is_finite())
            || sigma_min < 1.0
            || sigma_min >= sigma_max
            || sigma_max > SIGMA_MAX
        {
            return Err(ParamsError::InvalidBounds {
                sigma_min,
                sigma_max,
            });
        }
        Ok(SamplerParams {
            set: ParamSet::Custom,
            sigma_min,
            sigma_max,
        })
    }

    pub fn contains_sigma(&self, sigma_prime: f64) -> bool {
        sigma_prime >= self.sigma_min && sigma_prime <= self.sigma_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn falcon_sets() {
        let p = SamplerParams::falcon512();
        assert_eq!(p.sigma_min, 1.2778336969128337);
        assert_eq!(p.sigma_max, 1.8205);
        let p = SamplerParams::falcon1024();
        assert!(p.sigma_min > SIGMA_MIN_512 && p.sigma_min < SIGMA_MAX);
    }

    #[test]
    fn custom_validation() {
        assert!(SamplerParams::custom(1.2, 1.7).is_ok());
        assert!(SamplerParams::custom(1.7, 1.2).is_err());
        assert!(SamplerParams::custom(1.2, 2.5).is_err());
        assert!(SamplerParams::custom(f64::NAN, 1.5).is_err());
    }
}
