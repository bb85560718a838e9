//! Synthetic datasets with planted explanations.
//!
//! Rows carry a group attribute `grp`, categorical attributes `a0..a{m−1}`
//! with values `v0..`, and a binary outcome `y` (abs_max 1). Each row's `y`
//! is drawn with its group's base rate plus the lift of every planted atom
//! it satisfies, the lifts applying only inside the target group. Planted
//! atoms therefore carry the largest influence on questions comparing the
//! target group with another.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AttributeDomain, Dataset, Schema};
use crate::dp::RandomSource;
use crate::error::{Error, Result};

pub const GROUP_ATTR: &str = "grp";
pub const OUTCOME_ATTR: &str = "y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub size: usize,
    pub base_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedAtom {
    pub attr: usize,
    pub value: usize,
    pub lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub groups: Vec<GroupSpec>,
    pub attributes: usize,
    pub values_per_attr: usize,
    pub target_group: usize,
    pub planted: Vec<PlantedAtom>,
    pub seed: u64,
}

impl SynthSpec {
    /// Two large groups (45% each) and two small ones sharing the rest, six
    /// attributes of five values, and three planted atoms in group `g0`.
    pub fn with_rows(rows: usize, seed: u64) -> Self {
        let big = rows * 45 / 100;
        let rest = rows - 2 * big;
        let groups = vec![
            GroupSpec {
                name: "g0".into(),
                size: big,
                base_rate: 0.3,
            },
            GroupSpec {
                name: "g1".into(),
                size: big,
                base_rate: 0.3,
            },
            GroupSpec {
                name: "g2".into(),
                size: rest / 2,
                base_rate: 0.5,
            },
            GroupSpec {
                name: "g3".into(),
                size: rest - rest / 2,
                base_rate: 0.1,
            },
        ];
        Self {
            groups,
            attributes: 6,
            values_per_attr: 5,
            target_group: 0,
            planted: (0..3)
                .map(|a| PlantedAtom {
                    attr: a,
                    value: 0,
                    lift: 0.4 - 0.1 * a as f64,
                })
                .collect(),
            seed,
        }
    }

    pub fn rows(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut attrs = vec![AttributeDomain::categorical(
            GROUP_ATTR,
            self.groups.iter().map(|g| g.name.clone()),
        )];
        for a in 0..self.attributes {
            attrs.push(AttributeDomain::categorical(
                &format!("a{a}"),
                (0..self.values_per_attr).map(|v| format!("v{v}")),
            ));
        }
        attrs.push(AttributeDomain::numeric(OUTCOME_ATTR, ["0", "1"], 1.0));
        Ok(Schema::new(attrs)?)
    }

    fn check(&self) -> Result<()> {
        if self.groups.is_empty() || self.attributes == 0 || self.values_per_attr == 0 {
            return Err(Error::param("synthetic data needs groups, attributes and values"));
        }
        if self.target_group >= self.groups.len() {
            return Err(Error::param("target group out of range"));
        }
        for p in &self.planted {
            if p.attr >= self.attributes || p.value >= self.values_per_attr {
                return Err(Error::param(format!(
                    "planted atom a{} = v{} is outside the schema",
                    p.attr, p.value
                )));
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.check()?;
        let schema = Arc::new(self.schema()?);
        let mut rng = RandomSource::new(self.seed);
        let mut groups: Vec<usize> = self
            .groups
            .iter()
            .enumerate()
            .flat_map(|(g, spec)| std::iter::repeat_n(g, spec.size))
            .collect();
        groups.shuffle(&mut rng);
        let mut tuples = Vec::with_capacity(groups.len());
        for g in groups {
            let mut t = Vec::with_capacity(self.attributes + 2);
            t.push(g as u32);
            for _ in 0..self.attributes {
                t.push(rng.random_range(0..self.values_per_attr) as u32);
            }
            let mut p = self.groups[g].base_rate;
            if g == self.target_group {
                for a in &self.planted {
                    if t[1 + a.attr] == a.value as u32 {
                        p += a.lift;
                    }
                }
            }
            let y = rng.random::<f64>() < p.clamp(0.0, 1.0);
            t.push(u32::from(y));
            tuples.push(t);
        }
        Ok(Dataset::from_codes(schema, tuples)?)
    }
}
