use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DataError, Schema};

/// Comparison operator of a predicate atom. Order comparisons use the
/// declared domain order of the attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    fn holds(self, left: u32, right: u32) -> bool {
        match self {
            Comparator::Eq => left == right,
            Comparator::Ne => left != right,
            Comparator::Lt => left < right,
            Comparator::Le => left <= right,
            Comparator::Gt => left > right,
            Comparator::Ge => left >= right,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub attr: String,
    pub op: Comparator,
    pub value: String,
}

impl Atom {
    pub fn eq(attr: &str, value: &str) -> Self {
        Self {
            attr: attr.to_string(),
            op: Comparator::Eq,
            value: value.to_string(),
        }
    }
}

/// Conjunction of atoms. The empty conjunction is `true`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

impl Predicate {
    pub fn always() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn is_trivial(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Resolves attribute names and constants against `schema`.
    pub fn bind(&self, schema: &Schema) -> Result<BoundPredicate, DataError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let pos = schema.position(&a.attr)?;
                let code = schema.encode(pos, &a.value)?;
                Ok(BoundAtom {
                    pos,
                    op: a.op,
                    code,
                })
            })
            .collect::<Result<Vec<_>, DataError>>()?;
        Ok(BoundPredicate { atoms })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{} {} \"{}\"", a.attr, a.op.symbol(), a.value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundAtom {
    pub pos: usize,
    pub op: Comparator,
    pub code: u32,
}

/// A predicate compiled to attribute positions and value codes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundPredicate {
    pub atoms: Vec<BoundAtom>,
}

impl BoundPredicate {
    #[inline]
    pub fn matches(&self, tuple: &[u32]) -> bool {
        self.atoms
            .iter()
            .all(|a| a.op.holds(tuple[a.pos], a.code))
    }
}

/// Evaluates `p` on a tuple given as value labels in schema order.
pub fn evaluate_predicate<S: AsRef<str>>(
    schema: &Schema,
    p: &Predicate,
    tuple: &[S],
) -> Result<bool, DataError> {
    let bound = p.bind(schema)?;
    let codes = super::dataset::encode_labels(schema, tuple)?;
    Ok(bound.matches(&codes))
}
