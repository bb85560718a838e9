//! Ground truth for the experiment harness, computed by direct scans.
//!
//! Nothing here shares code with the engine's influence evaluator: every
//! aggregate is recomputed from the raw tuples for every predicate.

use anyhow::{anyhow, Result};
use dpxplain_core::data::{Aggregate, BoundPredicate, Dataset, GroupByQuery, UserQuestion};

pub struct Oracle<'d> {
    data: &'d Dataset,
    agg: Aggregate,
    group_pos: usize,
    values: Option<(usize, Vec<f64>)>,
    filter: BoundPredicate,
    terms: Vec<(u32, f64)>,
    constant: f64,
}

impl<'d> Oracle<'d> {
    pub fn new(data: &'d Dataset, query: &GroupByQuery, question: &UserQuestion) -> Result<Self> {
        let schema = data.schema();
        let group_pos = schema.position(&query.group_by)?;
        let values = match &query.agg_attr {
            Some(a) => {
                let pos = schema.position(a)?;
                let labels = &schema.attribute_at(pos).values;
                let nums = labels
                    .iter()
                    .map(|v| v.parse::<f64>().map_err(|_| anyhow!("`{v}` of `{a}` is not numeric")))
                    .collect::<Result<Vec<_>>>()?;
                Some((pos, nums))
            }
            None => None,
        };
        let domain = &schema.attribute_at(group_pos).values;
        let code = |g: &str| {
            domain
                .iter()
                .position(|v| v == g)
                .map(|c| c as u32)
                .ok_or_else(|| anyhow!("unknown group `{g}`"))
        };
        let (terms, constant) = match question {
            UserQuestion::Simple { group_i, group_j } => {
                (vec![(code(group_i)?, 1.0), (code(group_j)?, -1.0)], 0.0)
            }
            UserQuestion::General { weights, constant } => (
                weights
                    .iter()
                    .filter(|w| w.weight != 0.0)
                    .map(|w| Ok((code(&w.group)?, w.weight)))
                    .collect::<Result<Vec<_>>>()?,
                *constant,
            ),
        };
        Ok(Self {
            data,
            agg: query.agg,
            group_pos,
            values,
            filter: query.filter.bind(schema)?,
            terms,
            constant,
        })
    }

    /// Size and aggregate of group `g`, leaving out tuples matching `drop`.
    fn group(&self, g: u32, drop: Option<&BoundPredicate>) -> (f64, f64) {
        let mut n = 0.0;
        let mut sum = 0.0;
        for t in self.data.tuples() {
            if t[self.group_pos] != g || !self.filter.matches(t) {
                continue;
            }
            if drop.is_some_and(|p| p.matches(t)) {
                continue;
            }
            n += 1.0;
            if let Some((pos, nums)) = &self.values {
                sum += nums[t[*pos] as usize];
            }
        }
        let value = match self.agg {
            Aggregate::Count => n,
            Aggregate::Sum => sum,
            Aggregate::Avg if n == 0.0 => 0.0,
            Aggregate::Avg => sum / n,
        };
        (n, value)
    }

    /// True value of `Σ w·agg(g) − c`; positive means the question holds.
    pub fn question_value(&self) -> f64 {
        self.terms
            .iter()
            .map(|&(g, w)| w * self.group(g, None).1)
            .sum::<f64>()
            - self.constant
    }

    pub fn influence(&self, p: &BoundPredicate) -> f64 {
        let mut numerator = 0.0;
        let mut min_rest = f64::INFINITY;
        let mut max_full: f64 = 0.0;
        for &(g, w) in &self.terms {
            let (n_full, full) = self.group(g, None);
            let (n_rest, rest) = self.group(g, Some(p));
            numerator += w * full - w * rest;
            min_rest = min_rest.min(n_rest);
            max_full = max_full.max(n_full);
        }
        let scale = match self.agg {
            Aggregate::Avg => min_rest,
            _ => min_rest / (max_full + 1.0),
        };
        numerator * scale
    }
}

/// Range of positions (from 1) that influence `x` occupies among `all`.
pub fn rank_range(all: &[f64], x: f64) -> (usize, usize) {
    let above = all.iter().filter(|&&v| v > x).count();
    let at_least = all.iter().filter(|&&v| v >= x).count();
    (above + 1, at_least)
}

/// The `k`-th largest value of `all`.
pub fn kth_largest(all: &[f64], k: usize) -> f64 {
    let mut v = all.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite influences"));
    v[k - 1]
}

/// Kendall's tau-b between two paired samples.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = (a[i] - a[j]).signum() * f64::from(a[i] != a[j]);
            let db = (b[i] - b[j]).signum() * f64::from(b[i] != b[j]);
            match (da == 0.0, db == 0.0) {
                (true, true) => {}
                (true, false) => ties_a += 1.0,
                (false, true) => ties_b += 1.0,
                _ if da == db => concordant += 1.0,
                _ => discordant += 1.0,
            }
        }
    }
    let denom = ((concordant + discordant + ties_a) * (concordant + discordant + ties_b)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (concordant - discordant) / denom
    }
}
