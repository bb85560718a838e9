//! Attribute domains and schemas.
//!
//! Domains are declared up front and never inferred from data: every admissible
//! constant of an attribute is listed in the schema, in a fixed order that the
//! comparison operators and the predicate enumeration both rely on.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical,
    DiscretizedNumeric,
}

/// One attribute with its finite, ordered, data-independent domain.
///
/// An attribute can be aggregated (SUM/AVG) only when `abs_max` is set, in which
/// case every value label parses as a number bounded by `abs_max` in magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDomain {
    pub name: String,
    pub kind: AttributeKind,
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_max: Option<f64>,
}

impl AttributeDomain {
    pub fn categorical<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::Categorical,
            values: values.into_iter().map(Into::into).collect(),
            abs_max: None,
        }
    }

    /// A numeric attribute whose labels are numbers, usable as an aggregate.
    pub fn numeric<S: Into<String>>(
        name: &str,
        values: impl IntoIterator<Item = S>,
        abs_max: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            kind: AttributeKind::DiscretizedNumeric,
            values: values.into_iter().map(Into::into).collect(),
            abs_max: Some(abs_max),
        }
    }

    pub fn is_aggregatable(&self) -> bool {
        self.abs_max.is_some()
    }

    /// Position of `label` in the declared order.
    pub fn code_of(&self, label: &str) -> Option<u32> {
        self.values.iter().position(|v| v == label).map(|i| i as u32)
    }
}

/// Ordered list of attributes with unique names.
///
/// Construct through [`Schema::new`] (or deserialize and call
/// [`Schema::validate`]) so that the domain invariants are checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<AttributeDomain>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    numeric: Vec<Option<Vec<f64>>>,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeDomain>) -> Result<Self, DataError> {
        let mut schema = Self {
            attributes,
            index: HashMap::new(),
            numeric: Vec::new(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Parse the JSON sidecar document `{"attributes": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let raw: Schema =
            serde_json::from_str(text).map_err(|e| DataError::SchemaFormat(e.to_string()))?;
        Schema::new(raw.attributes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Checks every invariant and rebuilds the lookup tables.
    pub fn validate(&mut self) -> Result<(), DataError> {
        if self.attributes.is_empty() {
            return Err(DataError::InvalidSchema("no attributes".into()));
        }
        let mut index = HashMap::with_capacity(self.attributes.len());
        let mut numeric = Vec::with_capacity(self.attributes.len());
        for (pos, attr) in self.attributes.iter().enumerate() {
            if attr.name.is_empty() {
                return Err(DataError::InvalidSchema("empty attribute name".into()));
            }
            if index.insert(attr.name.clone(), pos).is_some() {
                return Err(DataError::InvalidSchema(format!(
                    "duplicate attribute `{}`",
                    attr.name
                )));
            }
            if attr.values.is_empty() {
                return Err(DataError::InvalidSchema(format!(
                    "attribute `{}` has an empty domain",
                    attr.name
                )));
            }
            let mut seen = std::collections::HashSet::with_capacity(attr.values.len());
            for v in &attr.values {
                if !seen.insert(v.as_str()) {
                    return Err(DataError::InvalidSchema(format!(
                        "attribute `{}` lists value `{v}` twice",
                        attr.name
                    )));
                }
            }
            match attr.abs_max {
                None => numeric.push(None),
                Some(bound) => {
                    if !(bound.is_finite() && bound >= 0.0) {
                        return Err(DataError::InvalidSchema(format!(
                            "attribute `{}` has invalid abs_max {bound}",
                            attr.name
                        )));
                    }
                    let mut parsed = Vec::with_capacity(attr.values.len());
                    for v in &attr.values {
                        let x: f64 = v.trim().parse().map_err(|_| {
                            DataError::InvalidSchema(format!(
                                "numeric attribute `{}` has non-numeric value `{v}`",
                                attr.name
                            ))
                        })?;
                        if !x.is_finite() || x.abs() > bound {
                            return Err(DataError::InvalidSchema(format!(
                                "value {v} of `{}` exceeds abs_max {bound}",
                                attr.name
                            )));
                        }
                        parsed.push(x);
                    }
                    numeric.push(Some(parsed));
                }
            }
        }
        self.index = index;
        self.numeric = numeric;
        Ok(())
    }

    pub fn attributes(&self) -> &[AttributeDomain] {
        &self.attributes
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize, DataError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| DataError::UnknownAttribute(name.to_string()))
    }

    pub fn attribute(&self, name: &str) -> Result<&AttributeDomain, DataError> {
        self.position(name).map(|i| &self.attributes[i])
    }

    pub fn attribute_at(&self, pos: usize) -> &AttributeDomain {
        &self.attributes[pos]
    }

    /// Numeric value table of an aggregatable attribute, indexed by value code.
    pub fn numeric_values(&self, pos: usize) -> Option<&[f64]> {
        self.numeric.get(pos).and_then(|v| v.as_deref())
    }

    /// Code of `label` within attribute `pos`, or a domain error.
    pub fn encode(&self, pos: usize, label: &str) -> Result<u32, DataError> {
        let attr = &self.attributes[pos];
        attr.code_of(label).ok_or_else(|| DataError::OutOfDomain {
            attribute: attr.name.clone(),
            value: label.to_string(),
        })
    }
}
