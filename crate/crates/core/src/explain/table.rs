use serde::{Deserialize, Serialize};

use super::RankInterval;
use crate::data::Predicate;
use crate::error::{Error, Result};
use crate::validate::ConfidenceInterval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRow {
    pub predicate: Predicate,
    /// Relative influence CI, or the raw influence CI when the table is
    /// degenerate.
    pub rel_influ_ci: ConfidenceInterval,
    pub rank_ci: RankInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTable {
    pub rows: Vec<ExplanationRow>,
    /// Set when the relative-influence divisor was zero or undefined and
    /// `rel_influ_ci` holds raw influence.
    pub degenerate: bool,
}

/// One selected predicate with its two intervals, before sorting.
#[derive(Debug, Clone)]
pub struct TableEntry {
    pub index: usize,
    pub predicate: Predicate,
    pub influence_ci: ConfidenceInterval,
    pub rank_ci: RankInterval,
}

/// Scales each influence CI by `divisor` and sorts by relative-influence
/// upper bound (descending), then rank upper bound (ascending), then the
/// canonical predicate index.
pub fn build_table(entries: Vec<TableEntry>, divisor: Option<f64>) -> Result<ExplanationTable> {
    if let Some(d) = divisor {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::param(format!("divisor must be positive, got {d}")));
        }
    }
    let mut rows: Vec<(usize, ExplanationRow)> = entries
        .into_iter()
        .map(|e| {
            let ci = match divisor {
                Some(d) => e.influence_ci.scaled_down(d),
                None => e.influence_ci,
            };
            (
                e.index,
                ExplanationRow {
                    predicate: e.predicate,
                    rel_influ_ci: ci,
                    rank_ci: e.rank_ci,
                },
            )
        })
        .collect();
    rows.sort_by(|(ia, a), (ib, b)| {
        b.rel_influ_ci
            .upper
            .total_cmp(&a.rel_influ_ci.upper)
            .then(a.rank_ci.upper.cmp(&b.rank_ci.upper))
            .then(ia.cmp(ib))
    });
    Ok(ExplanationTable {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
        degenerate: divisor.is_none(),
    })
}
