//! Rank confidence intervals by noisy binary search over influence gaps.

use serde::{Deserialize, Serialize};

use crate::dp::{gaussian_scale, sample_gaussian, DpError, PrivacyLedger, RandomSource};
use crate::error::{Error, Result};

pub const RANK_LABEL: &str = "rank";

/// Integer interval on a predicate's position in the true influence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankInterval {
    pub lower: usize,
    pub upper: usize,
}

impl RankInterval {
    pub fn contains(&self, rank: usize) -> bool {
        self.lower <= rank && rank <= self.upper
    }

    pub fn width(&self) -> usize {
        self.upper - self.lower
    }
}

/// `⌈log₂ n⌉`, the number of comparisons a search over `n` ranks spends.
pub fn search_steps(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Noise scale and decision threshold of one `rank_bound` call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchCalibration {
    pub steps: usize,
    pub sigma: f64,
    pub xi: f64,
}

/// `σ = 2Δ/√(2ρ/N)` and `ξ = dir·σ·√(2 ln(N/(1−β)))` with `N = ⌈log₂|P|⌉`.
pub fn calibrate(n: usize, delta: f64, rho: f64, beta: f64, dir: i8) -> Result<SearchCalibration> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(DpError::InvalidConfidence(beta).into());
    }
    let steps = search_steps(n);
    if steps == 0 {
        return Ok(SearchCalibration {
            steps,
            sigma: 0.0,
            xi: 0.0,
        });
    }
    let sigma = gaussian_scale(2.0 * delta, rho / steps as f64)?.sigma();
    let xi = sigma * (2.0 * (steps as f64 / (1.0 - beta)).ln()).sqrt() * f64::from(dir.signum());
    Ok(SearchCalibration { steps, sigma, xi })
}

/// Binary search for a rank bound on the predicate with influence `target`.
///
/// `ranked` holds every influence in descending order, so `ranked[t−1]` is
/// the influence at rank `t`. Each probe compares `target − ranked[t−1]`
/// plus `noise()` against `xi`: at or above moves the upper pointer left of
/// `t`, below moves the lower pointer right of `t`.
///
/// The search stops after `steps` probes even if the pointers have not
/// crossed, since the clamped updates can stall at either end. An upper
/// bound (`dir = +1`) is the upper pointer; a lower bound (`dir = −1`) is
/// the smaller of the two pointers.
pub fn rank_search(
    target: f64,
    ranked: &[f64],
    steps: usize,
    xi: f64,
    dir: i8,
    mut noise: impl FnMut() -> f64,
) -> usize {
    let n = ranked.len();
    if n <= 1 {
        return 1;
    }
    let (mut lo, mut hi) = (1usize, n);
    let mut probes = 0;
    while hi >= lo && probes < steps {
        let t = (hi + lo) / 2;
        let gap = target - ranked[t - 1] + noise();
        probes += 1;
        if gap >= xi {
            hi = (t - 1).max(1);
        } else {
            lo = (t + 1).min(n);
        }
    }
    if dir > 0 {
        hi
    } else {
        hi.min(lo)
    }
}

/// One-sided rank bound at level `beta` spending `rho`.
pub fn rank_bound(
    target: f64,
    ranked: &[f64],
    delta: f64,
    rho: f64,
    beta: f64,
    dir: i8,
    rng: &mut RandomSource,
) -> Result<usize> {
    let cal = calibrate(ranked.len(), delta, rho, beta, dir)?;
    let scale = crate::dp::NoiseScale::from_sigma(cal.sigma)?;
    Ok(rank_search(target, ranked, cal.steps, cal.xi, dir, || {
        sample_gaussian(scale, rng)
    }))
}

/// Two-sided rank CIs for the selected predicates.
///
/// Each predicate gets `ρRank/k`, split `η` to the lower and `1−η` to the
/// upper search, each at level `β = (γ+1)/2`. Crossed bounds are widened to
/// their hull. Charges `rho_rank` once.
#[allow(clippy::too_many_arguments)]
pub fn rank_ci(
    selected: &[f64],
    ranked: &[f64],
    delta: f64,
    rho_rank: f64,
    gamma: f64,
    eta: f64,
    ledger: &mut PrivacyLedger,
    rng: &mut RandomSource,
) -> Result<Vec<RankInterval>> {
    crate::validate::check_level(gamma)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(rho_rank.is_finite() && rho_rank > 0.0) {
        return Err(DpError::InvalidBudget(rho_rank).into());
    }
    let beta = (gamma + 1.0) / 2.0;
    let rho = rho_rank / selected.len().max(1) as f64;
    // Calibration errors surface before the charge.
    calibrate(ranked.len(), delta, eta * rho, beta, -1)?;
    calibrate(ranked.len(), delta, (1.0 - eta) * rho, beta, 1)?;
    ledger.charge(RANK_LABEL, rho_rank)?;
    let n = ranked.len().max(1);
    let mut out = Vec::with_capacity(selected.len());
    for &u in selected {
        let a = rank_bound(u, ranked, delta, eta * rho, beta, -1, rng)?;
        let b = rank_bound(u, ranked, delta, (1.0 - eta) * rho, beta, 1, rng)?;
        let (lower, upper) = (a.min(b).clamp(1, n), a.max(b).clamp(1, n));
        out.push(RankInterval { lower, upper });
    }
    Ok(out)
}
