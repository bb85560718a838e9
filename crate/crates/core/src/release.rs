//! Private answers to group-by aggregate queries.
//!
//! Every group of the declared domain is released, empty or not. Groups are
//! disjoint, so one release costs its ρ once (parallel composition).

use serde::{Deserialize, Serialize};

use crate::data::{Aggregate, Dataset, GroupByQuery, QueryPlan};
use crate::dp::{gaussian_scale, sample_gaussian, PrivacyLedger, RandomSource};
use crate::error::{Error, Result};
use crate::serde_util::nan_as_null;

pub const QUERY_LABEL: &str = "query";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyGroupResult {
    pub group: String,
    /// Noisy aggregate. For AVG this is the quotient of the two components,
    /// NaN (`null` on the wire) when the noisy count is exactly zero.
    #[serde(with = "nan_as_null")]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_component: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_component: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReleaseScales {
    Single { sigma: f64 },
    Avg { sigma_sum: f64, sigma_count: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRelease {
    pub query: GroupByQuery,
    pub results: Vec<NoisyGroupResult>,
    pub rho_query: f64,
    pub scales: ReleaseScales,
}

impl QueryRelease {
    /// Index of `group` in `results`; results follow the declared domain order.
    pub fn position(&self, group: &str) -> Option<usize> {
        self.results.iter().position(|r| r.group == group)
    }

    pub fn result(&self, group: &str) -> Option<&NoisyGroupResult> {
        self.position(group).map(|i| &self.results[i])
    }
}

/// Releases a COUNT or SUM query with `σ = Δ/√(2ρ)`, Δ = 1 or `abs_max`.
pub fn answer_count_sum(
    d: &Dataset,
    q: &GroupByQuery,
    rho: f64,
    ledger: &mut PrivacyLedger,
    rng: &mut RandomSource,
) -> Result<QueryRelease> {
    if q.agg == Aggregate::Avg {
        return Err(Error::param("answer_count_sum takes COUNT or SUM"));
    }
    let plan = q.plan(d.schema())?;
    let delta = if q.agg == Aggregate::Count { 1.0 } else { plan.abs_max() };
    let scale = gaussian_scale(delta, rho)?;
    ledger.charge(QUERY_LABEL, rho)?;
    let stats = plan.group_stats(d);
    let results = stats
        .iter()
        .enumerate()
        .map(|(g, s)| NoisyGroupResult {
            group: plan.group_label(g as u32).to_string(),
            value: s.aggregate(q.agg) + sample_gaussian(scale, rng),
            sum_component: None,
            count_component: None,
        })
        .collect();
    Ok(QueryRelease {
        query: q.clone(),
        results,
        rho_query: rho,
        scales: ReleaseScales::Single {
            sigma: scale.sigma(),
        },
    })
}

/// Releases an AVG query as a noisy SUM and a noisy COUNT per group, each at
/// ρ/2, and publishes their quotient.
pub fn answer_avg(
    d: &Dataset,
    q: &GroupByQuery,
    rho: f64,
    ledger: &mut PrivacyLedger,
    rng: &mut RandomSource,
) -> Result<QueryRelease> {
    if q.agg != Aggregate::Avg {
        return Err(Error::param("answer_avg takes AVG"));
    }
    let plan = q.plan(d.schema())?;
    let sum_scale = gaussian_scale(plan.abs_max(), rho / 2.0)?;
    let count_scale = gaussian_scale(1.0, rho / 2.0)?;
    ledger.charge(QUERY_LABEL, rho)?;
    let stats = plan.group_stats(d);
    let results = stats
        .iter()
        .enumerate()
        .map(|(g, s)| {
            let sum = s.sum + sample_gaussian(sum_scale, rng);
            let count = s.count as f64 + sample_gaussian(count_scale, rng);
            NoisyGroupResult {
                group: plan.group_label(g as u32).to_string(),
                value: avg_quotient(sum, count),
                sum_component: Some(sum),
                count_component: Some(count),
            }
        })
        .collect();
    Ok(QueryRelease {
        query: q.clone(),
        results,
        rho_query: rho,
        scales: ReleaseScales::Avg {
            sigma_sum: sum_scale.sigma(),
            sigma_count: count_scale.sigma(),
        },
    })
}

/// Dispatches on the aggregate.
pub fn answer_query(
    d: &Dataset,
    q: &GroupByQuery,
    rho: f64,
    ledger: &mut PrivacyLedger,
    rng: &mut RandomSource,
) -> Result<QueryRelease> {
    match q.agg {
        Aggregate::Avg => answer_avg(d, q, rho, ledger, rng),
        _ => answer_count_sum(d, q, rho, ledger, rng),
    }
}

pub fn avg_quotient(sum: f64, count: f64) -> f64 {
    if count == 0.0 {
        f64::NAN
    } else {
        sum / count
    }
}

/// Checks that `release` was produced for `plan` and has the expected shape.
pub(crate) fn check_release(release: &QueryRelease, plan: &QueryPlan) -> Result<()> {
    if release.results.len() != plan.groups().len()
        || release
            .results
            .iter()
            .zip(plan.groups())
            .any(|(r, g)| &r.group != g)
    {
        return Err(Error::Release("groups do not match the query domain".into()));
    }
    if release.query.agg == Aggregate::Avg
        && release
            .results
            .iter()
            .any(|r| r.sum_component.is_none() || r.count_component.is_none())
    {
        return Err(Error::Release("AVG release is missing its components".into()));
    }
    Ok(())
}
