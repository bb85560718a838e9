use crate::data::{Aggregate, BoundPredicate, BoundQuestion, Dataset, GroupStats, QueryPlan};

use super::PredicateSpace;

/// Evaluates the intervention influence of predicates for one question.
///
/// The influence of `p` is the drop in `Σ w_t·agg(g_t)` caused by deleting
/// the tuples satisfying `p`, scaled by a normalizer that vanishes when `p`
/// empties a referenced group:
///
/// * COUNT/SUM: `min_t |g_t(¬p)| / (max_t |g_t| + 1)`
/// * AVG: `min_t |g_t(¬p)|`
///
/// with min and max over groups of nonzero weight. The tuples of those
/// groups are gathered once; each predicate then costs one pass over them.
#[derive(Debug, Clone)]
pub struct InfluenceEvaluator<'d> {
    data: &'d Dataset,
    agg: Aggregate,
    weights: Vec<f64>,
    /// `(row, slot, value)` for every tuple in a referenced group.
    rows: Vec<(usize, usize, f64)>,
    full: Vec<GroupStats>,
    full_term: f64,
    max_full: u64,
}

impl<'d> InfluenceEvaluator<'d> {
    pub fn new(data: &'d Dataset, plan: &QueryPlan, question: &BoundQuestion) -> Self {
        let terms = question.terms();
        let mut slot_of = vec![usize::MAX; plan.groups().len()];
        for (slot, &(g, _)) in terms.iter().enumerate() {
            slot_of[g as usize] = slot;
        }
        let mut full = vec![GroupStats::default(); terms.len()];
        let mut rows = Vec::new();
        for (row, t) in data.tuples().enumerate() {
            if let Some(g) = plan.group_of(t) {
                let slot = slot_of[g as usize];
                if slot != usize::MAX {
                    let v = plan.value_of(t);
                    full[slot].add(v);
                    rows.push((row, slot, v));
                }
            }
        }
        let weights: Vec<f64> = terms.iter().map(|&(_, w)| w).collect();
        let full_term = weighted(&weights, &full, plan.agg);
        let max_full = full.iter().map(|s| s.count).max().unwrap_or(0);
        Self {
            data,
            agg: plan.agg,
            weights,
            rows,
            full,
            full_term,
            max_full,
        }
    }

    fn complement(&self, p: &BoundPredicate) -> Vec<GroupStats> {
        let mut rest = vec![GroupStats::default(); self.full.len()];
        for &(row, slot, v) in &self.rows {
            if !p.matches(self.data.tuple(row)) {
                rest[slot].add(v);
            }
        }
        rest
    }

    /// `Σ w·agg(g(D)) − Σ w·agg(g(¬p(D)))`, without the normalizer.
    pub fn numerator(&self, p: &BoundPredicate) -> f64 {
        let rest = self.complement(p);
        self.full_term - weighted(&self.weights, &rest, self.agg)
    }

    pub fn influence(&self, p: &BoundPredicate) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        let rest = self.complement(p);
        let numerator = self.full_term - weighted(&self.weights, &rest, self.agg);
        let min_rest = rest.iter().map(|s| s.count).min().unwrap_or(0) as f64;
        let norm = match self.agg {
            Aggregate::Avg => min_rest,
            _ => min_rest / (self.max_full as f64 + 1.0),
        };
        numerator * norm
    }

    pub fn influences(&self, space: &PredicateSpace) -> Vec<f64> {
        space.bound().iter().map(|p| self.influence(p)).collect()
    }
}

fn weighted(weights: &[f64], stats: &[GroupStats], agg: Aggregate) -> f64 {
    weights
        .iter()
        .zip(stats)
        .map(|(w, s)| w * s.aggregate(agg))
        .sum()
}
