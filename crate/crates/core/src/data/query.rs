use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BoundPredicate, DataError, Dataset, Predicate, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Aggregate {
    Count,
    Sum,
    Avg,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Count => "COUNT",
            Aggregate::Sum => "SUM",
            Aggregate::Avg => "AVG",
        })
    }
}

/// `SELECT group_by, agg(agg_attr) FROM R WHERE filter GROUP BY group_by`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupByQuery {
    pub agg: Aggregate,
    pub group_by: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agg_attr: Option<String>,
    #[serde(default, rename = "where", skip_serializing_if = "Predicate::is_trivial")]
    pub filter: Predicate,
}

impl GroupByQuery {
    pub fn count(group_by: &str) -> Self {
        Self {
            agg: Aggregate::Count,
            group_by: group_by.to_string(),
            agg_attr: None,
            filter: Predicate::always(),
        }
    }

    pub fn sum(group_by: &str, agg_attr: &str) -> Self {
        Self {
            agg: Aggregate::Sum,
            group_by: group_by.to_string(),
            agg_attr: Some(agg_attr.to_string()),
            filter: Predicate::always(),
        }
    }

    pub fn avg(group_by: &str, agg_attr: &str) -> Self {
        Self {
            agg: Aggregate::Avg,
            ..Self::sum(group_by, agg_attr)
        }
    }

    pub fn with_filter(mut self, filter: Predicate) -> Self {
        self.filter = filter;
        self
    }

    pub fn plan(&self, schema: &Schema) -> Result<QueryPlan, DataError> {
        QueryPlan::new(schema, self)
    }
}

impl fmt::Display for GroupByQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.agg_attr {
            Some(a) => write!(f, "SELECT {g}, {}({a}) FROM R", self.agg, g = self.group_by)?,
            None => write!(f, "SELECT {}, COUNT(*) FROM R", self.group_by)?,
        }
        if !self.filter.is_trivial() {
            write!(f, " WHERE {}", self.filter)?;
        }
        write!(f, " GROUP BY {}", self.group_by)
    }
}

/// A group-by query resolved against a schema.
#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub agg: Aggregate,
    pub group_pos: usize,
    pub agg_pos: Option<usize>,
    pub filter: BoundPredicate,
    group_labels: Vec<String>,
    agg_values: Option<Vec<f64>>,
    abs_max: f64,
}

impl QueryPlan {
    pub fn new(schema: &Schema, q: &GroupByQuery) -> Result<Self, DataError> {
        let group_pos = schema.position(&q.group_by)?;
        let agg_pos = match (q.agg, &q.agg_attr) {
            (Aggregate::Count, None) => None,
            (Aggregate::Count, Some(_)) => {
                return Err(DataError::InvalidQuery(
                    "COUNT takes no aggregate attribute".into(),
                ))
            }
            (_, None) => {
                return Err(DataError::InvalidQuery(format!(
                    "{} requires an aggregate attribute",
                    q.agg
                )))
            }
            (_, Some(name)) => {
                let pos = schema.position(name)?;
                if pos == group_pos {
                    return Err(DataError::InvalidQuery(
                        "group-by and aggregate attribute must differ".into(),
                    ));
                }
                if !schema.attribute_at(pos).is_aggregatable() {
                    return Err(DataError::InvalidQuery(format!(
                        "attribute `{name}` is not numeric (no abs_max declared)"
                    )));
                }
                Some(pos)
            }
        };
        let (agg_values, abs_max) = match agg_pos {
            Some(pos) => (
                schema.numeric_values(pos).map(<[f64]>::to_vec),
                schema.attribute_at(pos).abs_max.unwrap_or(0.0),
            ),
            None => (None, 1.0),
        };
        Ok(Self {
            agg: q.agg,
            group_pos,
            agg_pos,
            filter: q.filter.bind(schema)?,
            group_labels: schema.attribute_at(group_pos).values.clone(),
            agg_values,
            abs_max,
        })
    }

    /// Declared group domain, in order.
    pub fn groups(&self) -> &[String] {
        &self.group_labels
    }

    pub fn group_code(&self, label: &str) -> Result<u32, DataError> {
        self.group_labels
            .iter()
            .position(|g| g == label)
            .map(|i| i as u32)
            .ok_or_else(|| DataError::UnknownGroup(label.to_string()))
    }

    pub fn group_label(&self, code: u32) -> &str {
        &self.group_labels[code as usize]
    }

    /// `dommax` of the aggregate attribute; 1 for COUNT.
    pub fn abs_max(&self) -> f64 {
        self.abs_max
    }

    /// Group code of `tuple` if it passes the WHERE filter.
    #[inline]
    pub fn group_of(&self, tuple: &[u32]) -> Option<u32> {
        self.filter
            .matches(tuple)
            .then(|| tuple[self.group_pos])
    }

    /// Aggregated value contributed by `tuple` (1 for COUNT).
    #[inline]
    pub fn value_of(&self, tuple: &[u32]) -> f64 {
        match (self.agg_pos, &self.agg_values) {
            (Some(pos), Some(vals)) => vals[tuple[pos] as usize],
            _ => 1.0,
        }
    }

    /// Per-group (count, sum) over the whole declared group domain.
    pub fn group_stats(&self, d: &Dataset) -> Vec<GroupStats> {
        let mut stats = vec![GroupStats::default(); self.group_labels.len()];
        for t in d.tuples() {
            if let Some(g) = self.group_of(t) {
                stats[g as usize].add(self.value_of(t));
            }
        }
        stats
    }
}

/// Running count and sum of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GroupStats {
    pub count: u64,
    pub sum: f64,
}

impl GroupStats {
    #[inline]
    pub fn add(&mut self, value: f64) {
        self.count += 1;
        self.sum += value;
    }

    /// COUNT, SUM, or AVG of the group; AVG of an empty group is 0.
    pub fn aggregate(&self, agg: Aggregate) -> f64 {
        match agg {
            Aggregate::Count => self.count as f64,
            Aggregate::Sum => self.sum,
            Aggregate::Avg => {
                if self.count == 0 {
                    0.0
                } else {
                    self.sum / self.count as f64
                }
            }
        }
    }
}

/// The tuples of group `alpha`: those satisfying `where ∧ group_by = alpha`.
pub fn group_tuples<'d>(
    d: &'d Dataset,
    q: &GroupByQuery,
    alpha: &str,
) -> Result<Vec<&'d [u32]>, DataError> {
    let plan = q.plan(d.schema())?;
    let code = plan.group_code(alpha)?;
    Ok(d.tuples().filter(|t| plan.group_of(t) == Some(code)).collect())
}

/// True aggregate of group `alpha`. Test harness and ground-truth use only.
pub fn true_aggregate(d: &Dataset, q: &GroupByQuery, alpha: &str) -> Result<f64, DataError> {
    let plan = q.plan(d.schema())?;
    let code = plan.group_code(alpha)?;
    let mut s = GroupStats::default();
    for t in d.tuples() {
        if plan.group_of(t) == Some(code) {
            s.add(plan.value_of(t));
        }
    }
    Ok(s.aggregate(plan.agg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGroup {
    pub group: String,
    pub weight: f64,
}

/// "Why is group i's aggregate larger than group j's?" or the weighted form
/// "why Σ w_j·o_j ≥ c?".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum UserQuestion {
    Simple {
        group_i: String,
        group_j: String,
    },
    General {
        weights: Vec<WeightedGroup>,
        #[serde(default)]
        constant: f64,
    },
}

impl UserQuestion {
    pub fn simple(group_i: &str, group_j: &str) -> Self {
        UserQuestion::Simple {
            group_i: group_i.to_string(),
            group_j: group_j.to_string(),
        }
    }

    pub fn general(weights: &[(&str, f64)], constant: f64) -> Self {
        UserQuestion::General {
            weights: weights
                .iter()
                .map(|(g, w)| WeightedGroup {
                    group: g.to_string(),
                    weight: *w,
                })
                .collect(),
            constant,
        }
    }

    /// Resolves group labels and checks the question invariants.
    pub fn bind(&self, plan: &QueryPlan) -> Result<BoundQuestion, DataError> {
        self.bind_with(|g| plan.group_code(g))
    }

    /// As [`UserQuestion::bind`] with a caller-supplied group lookup.
    pub fn bind_with<F>(&self, group_code: F) -> Result<BoundQuestion, DataError>
    where
        F: Fn(&str) -> Result<u32, DataError>,
    {
        match self {
            UserQuestion::Simple { group_i, group_j } => {
                if group_i == group_j {
                    return Err(DataError::InvalidQuestion(
                        "a group cannot be compared with itself".into(),
                    ));
                }
                Ok(BoundQuestion::simple(
                    group_code(group_i)?,
                    group_code(group_j)?,
                ))
            }
            UserQuestion::General { weights, constant } => {
                if !constant.is_finite() {
                    return Err(DataError::InvalidQuestion("constant must be finite".into()));
                }
                let mut terms = Vec::with_capacity(weights.len());
                for w in weights {
                    if !w.weight.is_finite() {
                        return Err(DataError::InvalidQuestion(format!(
                            "weight of `{}` is not finite",
                            w.group
                        )));
                    }
                    let code = group_code(&w.group)?;
                    if terms.iter().any(|&(c, _)| c == code) {
                        return Err(DataError::InvalidQuestion(format!(
                            "group `{}` appears twice",
                            w.group
                        )));
                    }
                    terms.push((code, w.weight));
                }
                if terms.iter().all(|&(_, w)| w == 0.0) {
                    return Err(DataError::InvalidQuestion(
                        "at least one weight must be nonzero".into(),
                    ));
                }
                Ok(BoundQuestion::general(terms, *constant))
            }
        }
    }
}

impl fmt::Display for UserQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UserQuestion::Simple { group_i, group_j } => {
                write!(f, "why {group_i} > {group_j}?")
            }
            UserQuestion::General { weights, constant } => {
                f.write_str("why ")?;
                for (i, w) in weights.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{}*{}", w.weight, w.group)?;
                }
                write!(f, " >= {constant}?")
            }
        }
    }
}

/// A question over group codes: the weighted combination `Σ w·o − c`.
///
/// The simple question `(i, j)` is the special case `w = (1, −1)`, `c = 0`,
/// and every downstream computation goes through the weighted form.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuestion {
    terms: Vec<(u32, f64)>,
    constant: f64,
    simple: bool,
}

impl BoundQuestion {
    pub fn simple(i: u32, j: u32) -> Self {
        Self {
            terms: vec![(i, 1.0), (j, -1.0)],
            constant: 0.0,
            simple: true,
        }
    }

    /// Weighted question without invariant checks; zero weights are dropped.
    pub fn general(terms: Vec<(u32, f64)>, constant: f64) -> Self {
        Self {
            terms: terms.into_iter().filter(|&(_, w)| w != 0.0).collect(),
            constant,
            simple: false,
        }
    }

    pub fn is_simple(&self) -> bool {
        self.simple
    }

    /// Groups with nonzero weight, in question order.
    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn abs_weight_sum(&self) -> f64 {
        self.terms.iter().map(|&(_, w)| w.abs()).sum()
    }
}
