use crate::dp::{sample_gumbel, PrivacyLedger, RandomSource};
use crate::error::{Error, Result};

pub const TOPK_LABEL: &str = "topk";

/// Gumbel scale `2Δ·√(k/(8ρ))` for one-shot top-k under ρ-zCDP.
pub fn gumbel_scale(delta: f64, rho_topk: f64, k: usize) -> f64 {
    2.0 * delta * (k as f64 / (8.0 * rho_topk)).sqrt()
}

/// Outcome of the private top-k selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKSelection {
    /// Indices into the predicate space, best first.
    pub indices: Vec<usize>,
    /// Noisy scores of the selected predicates. Only the selection itself is
    /// covered by the privacy analysis; these must never be published.
    pub noisy_scores: Vec<f64>,
    pub rho_topk: f64,
}

/// Adds i.i.d. Gumbel noise to every influence and keeps the `k` largest,
/// ties going to the earlier canonical index. Charges `rho_topk` once.
pub fn noisy_topk(
    influences: &[f64],
    delta: f64,
    rho_topk: f64,
    k: usize,
    ledger: &mut PrivacyLedger,
    rng: &mut RandomSource,
) -> Result<TopKSelection> {
    check_k(k, influences.len())?;
    if !(rho_topk.is_finite() && rho_topk > 0.0) {
        return Err(crate::dp::DpError::InvalidBudget(rho_topk).into());
    }
    ledger.charge(TOPK_LABEL, rho_topk)?;
    let sigma = gumbel_scale(delta, rho_topk, k);
    let noisy: Vec<f64> = influences
        .iter()
        .map(|&u| u + sample_gumbel(sigma, rng))
        .collect();
    let indices = top_indices(&noisy, k);
    Ok(TopKSelection {
        noisy_scores: indices.iter().map(|&i| noisy[i]).collect(),
        indices,
        rho_topk,
    })
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if k > n {
        return Err(Error::param(format!(
            "k = {k} exceeds the {n} candidate predicates"
        )));
    }
    Ok(())
}

/// Indices of the `k` largest scores, descending, ties by index.
pub fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}
