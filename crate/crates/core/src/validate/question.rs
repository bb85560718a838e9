use serde::{Deserialize, Serialize};

use super::interval::{interval_quotient, ConfidenceInterval, Interval};
use super::check_level;
use crate::data::{Aggregate, BoundQuestion, DataError, UserQuestion};
use crate::dp::inverse_erf;
use crate::error::{Error, Result};
use crate::release::{QueryRelease, ReleaseScales};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Supported,
    PossiblyNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub interval: ConfidenceInterval,
    pub verdict: Verdict,
}

impl ValidityVerdict {
    pub fn of(interval: ConfidenceInterval) -> Self {
        let verdict = if interval.lower > 0.0 {
            Verdict::Supported
        } else {
            Verdict::PossiblyNoise
        };
        Self { interval, verdict }
    }
}

/// Resolves a question against the groups of a release.
pub fn bind_to_release(release: &QueryRelease, question: &UserQuestion) -> Result<BoundQuestion> {
    Ok(question.bind_with(|g| {
        release
            .position(g)
            .map(|i| i as u32)
            .ok_or_else(|| DataError::UnknownGroup(g.to_string()))
    })?)
}

/// CI for `ô_i − ô_j` on a COUNT or SUM release.
pub fn question_ci_count_sum(
    release: &QueryRelease,
    group_i: &str,
    group_j: &str,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    if release.query.agg == Aggregate::Avg {
        return Err(Error::Release("COUNT/SUM interval requested on an AVG release".into()));
    }
    let q = bind_to_release(release, &UserQuestion::simple(group_i, group_j))?;
    question_ci_bound(release, &q, gamma)
}

/// CI for `o_i − o_j` on an AVG release, from the stored components.
pub fn question_ci_avg(
    release: &QueryRelease,
    group_i: &str,
    group_j: &str,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    if release.query.agg != Aggregate::Avg {
        return Err(Error::Release("AVG interval requested on a COUNT/SUM release".into()));
    }
    let q = bind_to_release(release, &UserQuestion::simple(group_i, group_j))?;
    question_ci_bound(release, &q, gamma)
}

/// CI for `Σ w_j·o_j − c`.
pub fn question_ci_general(
    release: &QueryRelease,
    weights: &[(&str, f64)],
    constant: f64,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    let mut terms = Vec::with_capacity(weights.len());
    for &(g, w) in weights {
        let pos = release
            .position(g)
            .ok_or_else(|| DataError::UnknownGroup(g.to_string()))?;
        terms.push((pos as u32, w));
    }
    question_ci_bound(release, &BoundQuestion::general(terms, constant), gamma)
}

pub fn question_ci(
    release: &QueryRelease,
    question: &UserQuestion,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    question_ci_bound(release, &bind_to_release(release, question)?, gamma)
}

pub fn validate_question(
    release: &QueryRelease,
    question: &UserQuestion,
    gamma: f64,
) -> Result<ValidityVerdict> {
    question_ci(release, question, gamma).map(ValidityVerdict::of)
}

/// Shared path for every question form; the simple question is the weighted
/// question `(1, −1)`, `c = 0`.
pub fn question_ci_bound(
    release: &QueryRelease,
    q: &BoundQuestion,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    check_level(gamma)?;
    if let Some(&(g, _)) = q.terms().iter().find(|(g, _)| *g as usize >= release.results.len()) {
        return Err(Error::Release(format!("group #{g} is not in the release")));
    }
    match release.scales {
        ReleaseScales::Single { sigma } => {
            let values: Vec<(f64, f64)> = q
                .terms()
                .iter()
                .map(|&(g, w)| (release.results[g as usize].value, w))
                .collect();
            linear_ci(&values, q.constant(), sigma, gamma)
        }
        ReleaseScales::Avg {
            sigma_sum,
            sigma_count,
        } => {
            let mut comps = Vec::with_capacity(q.terms().len());
            for &(g, w) in q.terms() {
                let r = &release.results[g as usize];
                match (r.sum_component, r.count_component) {
                    (Some(s), Some(c)) => comps.push(AvgTerm {
                        sum: s,
                        count: c,
                        weight: w,
                    }),
                    _ => {
                        return Err(Error::Release(format!(
                            "group `{}` has no stored AVG components",
                            r.group
                        )))
                    }
                }
            }
            avg_ci(&comps, q.constant(), sigma_sum, sigma_count, gamma)
        }
    }
}

/// Gaussian CI for `Σ w·ô − c` with i.i.d. noise of scale `sigma` per value:
/// margin `√(2Σw²)·σ·erf⁻¹(γ)`.
pub fn linear_ci(
    values: &[(f64, f64)],
    constant: f64,
    sigma: f64,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    let e = inverse_erf(gamma)?;
    let center = values.iter().map(|&(o, w)| w * o).sum::<f64>() - constant;
    let w2: f64 = values.iter().map(|&(_, w)| w * w).sum();
    let margin = (2.0 * w2).sqrt() * sigma * e;
    Ok(ConfidenceInterval::new(Interval::around(center, margin), gamma))
}

#[derive(Debug, Clone, Copy)]
pub struct AvgTerm {
    pub sum: f64,
    pub count: f64,
    pub weight: f64,
}

/// CI for `Σ w·(S/C) − c` from `2m` component releases, each bounded at
/// level `β = 1 − (1−γ)/(2m)`; trivial if any count interval reaches zero.
pub fn avg_ci(
    terms: &[AvgTerm],
    constant: f64,
    sigma_sum: f64,
    sigma_count: f64,
    gamma: f64,
) -> Result<ConfidenceInterval> {
    check_level(gamma)?;
    if terms.is_empty() {
        return Ok(ConfidenceInterval::new(Interval::point(-constant), gamma));
    }
    let m = terms.len() as f64;
    let beta = 1.0 - (1.0 - gamma) / (2.0 * m);
    let e = inverse_erf(beta)?;
    let ms = std::f64::consts::SQRT_2 * sigma_sum * e;
    let mc = std::f64::consts::SQRT_2 * sigma_count * e;
    let mut acc = Interval::point(0.0);
    for t in terms {
        let s = Interval::around(t.sum, ms);
        let c = Interval::around(t.count, mc);
        match interval_quotient(s, c) {
            Some(q) => acc = acc.add(q.scale(t.weight)),
            None => return Ok(ConfidenceInterval::trivial(gamma)),
        }
    }
    Ok(ConfidenceInterval::new(acc.shift(-constant), gamma))
}
