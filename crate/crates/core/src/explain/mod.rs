//! Private explanation tables: top-k selection, influence CIs, rank CIs.

mod influence_ci;
mod rank;
mod table;
mod topk;

pub use influence_ci::{influence_ci, INFLU_LABEL};
pub use rank::{
    calibrate, rank_bound, rank_ci, rank_search, search_steps, RankInterval, SearchCalibration,
    RANK_LABEL,
};
pub use table::{build_table, ExplanationRow, ExplanationTable, TableEntry};
pub use topk::{gumbel_scale, noisy_topk, top_indices, TopKSelection, TOPK_LABEL};

/// Influences sorted from highest to lowest.
pub fn descending(influences: &[f64]) -> Vec<f64> {
    let mut v = influences.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Position (from 1) of every predicate in the true influence order, ties
/// broken by canonical index.
pub fn true_ranks(influences: &[f64]) -> Vec<usize> {
    let order = top_indices(influences, influences.len());
    let mut rank = vec![0; influences.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    rank
}
