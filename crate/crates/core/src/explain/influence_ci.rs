use crate::dp::{gaussian_scale, inverse_erf, sample_gaussian, PrivacyLedger, RandomSource};
use crate::error::Result;
use crate::validate::{ConfidenceInterval, Interval};

pub const INFLU_LABEL: &str = "influ";

/// Gaussian CIs on the raw influence of each selected predicate.
///
/// Each of the `k` releases gets `ρInflu/k`, so `σ = Δ/√(2ρInflu/k)` and the
/// margin is `√2·σ·erf⁻¹(γ)`. Charges `rho_influ` once.
pub fn influence_ci(
    selected: &[f64],
    delta: f64,
    rho_influ: f64,
    gamma: f64,
    ledger: &mut PrivacyLedger,
    rng: &mut RandomSource,
) -> Result<Vec<ConfidenceInterval>> {
    crate::validate::check_level(gamma)?;
    let k = selected.len().max(1) as f64;
    let scale = gaussian_scale(delta, rho_influ / k)?;
    let e = inverse_erf(gamma)?;
    ledger.charge(INFLU_LABEL, rho_influ)?;
    let margin = std::f64::consts::SQRT_2 * scale.sigma() * e;
    Ok(selected
        .iter()
        .map(|&u| {
            let center = u + sample_gaussian(scale, rng);
            ConfidenceInterval::new(Interval::around(center, margin), gamma)
        })
        .collect())
}
