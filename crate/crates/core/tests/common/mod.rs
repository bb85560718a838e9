#![allow(dead_code)]

use std::sync::Arc;

use dpxplain_core::data::{AttributeDomain, Dataset, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `g ∈ {a, b}`, three binary attributes and a numeric outcome `y`.
pub fn tiny_schema(y_values: &[&str], abs_max: f64) -> Arc<Schema> {
    Arc::new(
        Schema::new(vec![
            AttributeDomain::categorical("g", ["a", "b"]),
            AttributeDomain::categorical("x0", ["0", "1"]),
            AttributeDomain::categorical("x1", ["0", "1"]),
            AttributeDomain::categorical("x2", ["0", "1"]),
            AttributeDomain::numeric("y", y_values.iter().copied(), abs_max),
        ])
        .unwrap(),
    )
}

pub fn random_tiny(schema: &Arc<Schema>, rng: &mut ChaCha8Rng, max_rows: usize) -> Dataset {
    let n = rng.random_range(0..=max_rows);
    let tuples = (0..n)
        .map(|_| {
            schema
                .attributes()
                .iter()
                .map(|a| rng.random_range(0..a.values.len()) as u32)
                .collect()
        })
        .collect();
    Dataset::from_codes(Arc::clone(schema), tuples).unwrap()
}

/// Every tuple of the schema's domain.
pub fn all_tuples(schema: &Schema) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for a in schema.attributes() {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..a.values.len() as u32).map(move |v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

/// Every neighbor: each row removed, and each domain tuple added.
pub fn neighbors(d: &Dataset) -> Vec<Dataset> {
    let mut out: Vec<Dataset> = (0..d.len()).map(|r| d.without_row(r)).collect();
    for t in all_tuples(d.schema()) {
        out.push(d.with_tuple(&t).unwrap());
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, PartialEq)]
pub enum Agg {
    Count,
    Sum,
    Avg,
}

/// Straightforward influence: materialize every group and its complement
/// as value lists and apply the definition term by term.
pub struct NaiveInfluence<'a> {
    pub group_pos: usize,
    pub y_pos: Option<usize>,
    pub agg: Agg,
    pub terms: &'a [(u32, f64)],
}

impl NaiveInfluence<'_> {
    fn value(&self, d: &Dataset, t: &[u32]) -> f64 {
        match self.y_pos {
            Some(p) => d.schema().attribute_at(p).values[t[p] as usize].parse().unwrap(),
            None => 1.0,
        }
    }

    fn agg(&self, vals: &[f64]) -> f64 {
        match self.agg {
            Agg::Count => vals.len() as f64,
            Agg::Sum => vals.iter().sum(),
            Agg::Avg => {
                if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            }
        }
    }

    /// `atoms` are `(attribute position, value code)` equalities.
    pub fn eval(&self, d: &Dataset, atoms: &[(usize, u32)]) -> (f64, f64) {
        let live: Vec<(u32, f64)> = self.terms.iter().copied().filter(|t| t.1 != 0.0).collect();
        if live.is_empty() {
            return (0.0, 0.0);
        }
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut min_rest = usize::MAX;
        let mut max_full = 0usize;
        for &(g, w) in &live {
            let full: Vec<f64> = d
                .tuples()
                .filter(|t| t[self.group_pos] == g)
                .map(|t| self.value(d, t))
                .collect();
            let rest: Vec<f64> = d
                .tuples()
                .filter(|t| t[self.group_pos] == g)
                .filter(|t| !atoms.iter().all(|&(p, v)| t[p] == v))
                .map(|t| self.value(d, t))
                .collect();
            lhs += w * self.agg(&full);
            rhs += w * self.agg(&rest);
            min_rest = min_rest.min(rest.len());
            max_full = max_full.max(full.len());
        }
        let numerator = lhs - rhs;
        let norm = match self.agg {
            Agg::Avg => min_rest as f64,
            _ => min_rest as f64 / (max_full as f64 + 1.0),
        };
        (numerator, numerator * norm)
    }
}
