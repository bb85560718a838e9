//! Intervention influence of explanation predicates, its sensitivity, and the
//! candidate predicate space.

mod space;
mod value;

pub use space::{eligible_attributes, enumerate_predicates, PredicateSpace};
pub use value::InfluenceEvaluator;

use serde::{Deserialize, Serialize};

use crate::data::{Aggregate, BoundQuestion};
use crate::release::QueryRelease;

/// Global sensitivity of the influence function under add/remove neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBound {
    pub delta: f64,
    pub agg: Aggregate,
}

/// Simple questions: `4`, `4·abs_max`, `16·abs_max` for COUNT, SUM, AVG.
/// Weighted questions: `2Σ|w|`, `2Σ|w|·abs_max`, `8Σ|w|·abs_max`.
pub fn sensitivity(agg: Aggregate, abs_max: f64, question: &BoundQuestion) -> SensitivityBound {
    let delta = if question.is_simple() {
        match agg {
            Aggregate::Count => 4.0,
            Aggregate::Sum => 4.0 * abs_max,
            Aggregate::Avg => 16.0 * abs_max,
        }
    } else {
        let w = question.abs_weight_sum();
        match agg {
            Aggregate::Count => 2.0 * w,
            Aggregate::Sum => 2.0 * w * abs_max,
            Aggregate::Avg => 8.0 * w * abs_max,
        }
    };
    SensitivityBound { delta, agg }
}

/// Scale turning influence into a share of the observed gap:
/// `|Σ w·ô − c|`, times `|min_t ô_t^C|` for AVG.
///
/// `None` when the scale is zero or undefined; callers then display raw
/// influence.
pub fn relative_influence_divisor(question: &BoundQuestion, release: &QueryRelease) -> Option<f64> {
    let mut gap = -question.constant();
    let mut min_count = f64::INFINITY;
    for &(g, w) in question.terms() {
        let r = release.results.get(g as usize)?;
        gap += w * r.value;
        if release.query.agg == Aggregate::Avg {
            min_count = min_count.min(r.count_component?);
        }
    }
    let mut d = gap.abs();
    if release.query.agg == Aggregate::Avg {
        d *= min_count.abs();
    }
    (d.is_finite() && d > 0.0).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GroupByQuery;
    use crate::release::{NoisyGroupResult, ReleaseScales};

    #[test]
    fn sensitivity_constants() {
        let s = BoundQuestion::simple(0, 1);
        assert_eq!(sensitivity(Aggregate::Count, 1.0, &s).delta, 4.0);
        assert_eq!(sensitivity(Aggregate::Sum, 3.0, &s).delta, 12.0);
        assert_eq!(sensitivity(Aggregate::Avg, 1.0, &s).delta, 16.0);
        let taxi = BoundQuestion::general(vec![(0, 1.0), (1, -10.0)], 0.0);
        assert_eq!(sensitivity(Aggregate::Count, 1.0, &taxi).delta, 22.0);
        let pair = BoundQuestion::general(vec![(0, 1.0), (1, -1.0)], 0.0);
        assert_eq!(sensitivity(Aggregate::Avg, 1.0, &pair).delta, 16.0);
    }

    fn release(agg: Aggregate, vals: &[(f64, Option<f64>)]) -> QueryRelease {
        QueryRelease {
            query: if agg == Aggregate::Avg {
                GroupByQuery::avg("g", "y")
            } else {
                GroupByQuery::count("g")
            },
            results: vals
                .iter()
                .enumerate()
                .map(|(i, &(v, c))| NoisyGroupResult {
                    group: format!("g{i}"),
                    value: v,
                    sum_component: c.map(|c| v * c),
                    count_component: c,
                })
                .collect(),
            rho_query: 0.1,
            scales: ReleaseScales::Single { sigma: 1.0 },
        }
    }

    #[test]
    fn divisors() {
        let q = BoundQuestion::simple(0, 1);
        let r = release(Aggregate::Count, &[(15.0, None), (5.0, None)]);
        assert_eq!(relative_influence_divisor(&q, &r), Some(10.0));
        let a = release(Aggregate::Avg, &[(0.6, Some(22000.0)), (0.2, Some(16000.0))]);
        let d = relative_influence_divisor(&q, &a).unwrap();
        assert!((d - 6400.0).abs() < 1e-9);
        let same = release(Aggregate::Count, &[(5.0, None), (5.0, None)]);
        assert_eq!(relative_influence_divisor(&q, &same), None);
    }
}
