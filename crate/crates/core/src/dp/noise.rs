use rand::Rng;
use rand_distr::StandardNormal;

use super::{DpError, RandomSource};

/// Standard deviation of a Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoiseScale {
    sigma: f64,
}

impl NoiseScale {
    pub fn from_sigma(sigma: f64) -> Result<Self, DpError> {
        if sigma.is_finite() && sigma >= 0.0 {
            Ok(Self { sigma })
        } else {
            Err(DpError::InvalidScale(sigma))
        }
    }

    pub fn sigma(self) -> f64 {
        self.sigma
    }
}

/// `σ = Δ/√(2ρ)`, the ρ-zCDP calibration for sensitivity `delta`.
pub fn gaussian_scale(delta: f64, rho: f64) -> Result<NoiseScale, DpError> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(DpError::InvalidSensitivity(delta));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(DpError::InvalidBudget(rho));
    }
    Ok(NoiseScale {
        sigma: delta / (2.0 * rho).sqrt(),
    })
}

pub fn sample_gaussian(scale: NoiseScale, rng: &mut RandomSource) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    scale.sigma * z
}

/// Inverse CDF of the Gumbel distribution `exp(−exp(−z/σ))`.
pub fn gumbel_from_uniform(sigma: f64, u: f64) -> f64 {
    let u = u.max(1e-300);
    -sigma * (-u.ln()).ln()
}

pub fn sample_gumbel(sigma: f64, rng: &mut RandomSource) -> f64 {
    // `random::<f64>()` is in [0, 1); only the lower end needs the clamp.
    gumbel_from_uniform(sigma, rng.random::<f64>())
}
