use crate::data::{Atom, BoundPredicate, Predicate, QueryPlan, Schema};
use crate::error::{Error, Result};

/// The candidate explanation predicates for a query, in canonical order.
///
/// Predicates are conjunctions of `l` equality atoms over distinct attributes
/// other than the group-by and aggregate attributes. Attribute combinations
/// are ordered lexicographically by schema position, and within a
/// combination the values run in declared domain order with the last
/// attribute varying fastest. Every downstream tie-break uses this order.
#[derive(Debug, Clone)]
pub struct PredicateSpace {
    pub l: usize,
    predicates: Vec<Predicate>,
    bound: Vec<BoundPredicate>,
}

impl PredicateSpace {
    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn predicate(&self, i: usize) -> &Predicate {
        &self.predicates[i]
    }

    pub fn bound(&self) -> &[BoundPredicate] {
        &self.bound
    }
}

/// Attributes a predicate may mention.
pub fn eligible_attributes(schema: &Schema, plan: &QueryPlan) -> Vec<usize> {
    (0..schema.len())
        .filter(|&p| p != plan.group_pos && Some(p) != plan.agg_pos)
        .collect()
}

pub fn enumerate_predicates(schema: &Schema, plan: &QueryPlan, l: usize) -> Result<PredicateSpace> {
    let eligible = eligible_attributes(schema, plan);
    if l == 0 {
        return Err(Error::param("predicates need at least one atom (l >= 1)"));
    }
    if l > eligible.len() {
        return Err(Error::param(format!(
            "l = {l} exceeds the {} eligible attributes",
            eligible.len()
        )));
    }
    let mut predicates = Vec::new();
    let mut combo: Vec<usize> = (0..l).collect();
    loop {
        let attrs: Vec<usize> = combo.iter().map(|&i| eligible[i]).collect();
        let sizes: Vec<usize> = attrs
            .iter()
            .map(|&a| schema.attribute_at(a).values.len())
            .collect();
        let mut vals = vec![0usize; l];
        'values: loop {
            predicates.push(Predicate::new(
                attrs
                    .iter()
                    .zip(&vals)
                    .map(|(&a, &v)| {
                        let dom = schema.attribute_at(a);
                        Atom::eq(&dom.name, &dom.values[v])
                    })
                    .collect(),
            ));
            let mut i = l;
            while i > 0 {
                i -= 1;
                vals[i] += 1;
                if vals[i] < sizes[i] {
                    continue 'values;
                }
                vals[i] = 0;
            }
            break;
        }
        if !next_combination(&mut combo, eligible.len()) {
            break;
        }
    }
    let bound = predicates
        .iter()
        .map(|p| p.bind(schema))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PredicateSpace {
        l,
        predicates,
        bound,
    })
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
