use std::io::Read;
use std::sync::Arc;

use super::{DataError, Schema};

/// An immutable bag of tuples over a schema.
///
/// Tuples are stored row-major as value codes (positions in each attribute's
/// declared domain). Duplicates are kept; neighbor construction returns a new
/// dataset and leaves `self` untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    codes: Vec<u32>,
    rows: usize,
}

impl Dataset {
    pub fn empty(schema: Arc<Schema>) -> Self {
        Self {
            schema,
            codes: Vec::new(),
            rows: 0,
        }
    }

    /// Builds a dataset from already-encoded tuples, checking every code.
    pub fn from_codes(schema: Arc<Schema>, tuples: Vec<Vec<u32>>) -> Result<Self, DataError> {
        let width = schema.len();
        let mut codes = Vec::with_capacity(tuples.len() * width);
        for (row, tuple) in tuples.iter().enumerate() {
            check_tuple(&schema, tuple).map_err(|e| DataError::Row {
                row: row + 1,
                source: Box::new(e),
            })?;
            codes.extend_from_slice(tuple);
        }
        Ok(Self {
            rows: tuples.len(),
            schema,
            codes,
        })
    }

    /// Builds a dataset from value labels in schema order.
    pub fn from_labels<S: AsRef<str>>(
        schema: Arc<Schema>,
        tuples: &[Vec<S>],
    ) -> Result<Self, DataError> {
        let encoded = tuples
            .iter()
            .enumerate()
            .map(|(row, t)| {
                encode_labels(&schema, t).map_err(|e| DataError::Row {
                    row: row + 1,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_codes(schema, encoded)
    }

    /// Reads a CSV document with a header row naming the schema attributes.
    ///
    /// Columns may appear in any order but must cover the schema exactly. Row
    /// numbers in errors count data rows from 1.
    pub fn from_csv<R: Read>(schema: Arc<Schema>, reader: R) -> Result<Self, DataError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| DataError::Csv(e.to_string()))?
            .clone();
        if header.len() != schema.len() {
            return Err(DataError::Csv(format!(
                "header has {} columns, schema declares {}",
                header.len(),
                schema.len()
            )));
        }
        let mut column_of = vec![usize::MAX; schema.len()];
        for (col, name) in header.iter().enumerate() {
            let pos = schema.position(name)?;
            if column_of[pos] != usize::MAX {
                return Err(DataError::Csv(format!("column `{name}` appears twice")));
            }
            column_of[pos] = col;
        }
        let mut codes = Vec::new();
        let mut rows = 0usize;
        for (i, record) in csv.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| DataError::Row {
                row,
                source: Box::new(DataError::Csv(e.to_string())),
            })?;
            for (pos, &col) in column_of.iter().enumerate() {
                let label = record.get(col).unwrap_or_default();
                let code = schema.encode(pos, label).map_err(|e| DataError::Row {
                    row,
                    source: Box::new(e),
                })?;
                codes.push(code);
            }
            rows += 1;
        }
        Ok(Self {
            schema,
            codes,
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(self.schema.attributes().iter().map(|a| a.name.as_str()))
            .expect("in-memory write");
        for t in self.tuples() {
            out.write_record(
                t.iter()
                    .enumerate()
                    .map(|(pos, &c)| self.schema.attribute_at(pos).values[c as usize].as_str()),
            )
            .expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("flush")).expect("utf8 labels")
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn tuple(&self, row: usize) -> &[u32] {
        let w = self.schema.len();
        &self.codes[row * w..(row + 1) * w]
    }

    pub fn tuples(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        let w = self.schema.len().max(1);
        self.codes.chunks_exact(w).take(self.rows)
    }

    /// Neighbor with one extra tuple appended.
    pub fn with_tuple(&self, tuple: &[u32]) -> Result<Self, DataError> {
        check_tuple(&self.schema, tuple)?;
        let mut codes = Vec::with_capacity(self.codes.len() + tuple.len());
        codes.extend_from_slice(&self.codes);
        codes.extend_from_slice(tuple);
        Ok(Self {
            schema: Arc::clone(&self.schema),
            codes,
            rows: self.rows + 1,
        })
    }

    /// Neighbor with the tuple at `row` removed.
    pub fn without_row(&self, row: usize) -> Self {
        assert!(row < self.rows, "row {row} out of range");
        let w = self.schema.len();
        let mut codes = Vec::with_capacity(self.codes.len() - w);
        codes.extend_from_slice(&self.codes[..row * w]);
        codes.extend_from_slice(&self.codes[(row + 1) * w..]);
        Self {
            schema: Arc::clone(&self.schema),
            codes,
            rows: self.rows - 1,
        }
    }
}

pub(crate) fn encode_labels<S: AsRef<str>>(
    schema: &Schema,
    labels: &[S],
) -> Result<Vec<u32>, DataError> {
    if labels.len() != schema.len() {
        return Err(DataError::Arity {
            expected: schema.len(),
            found: labels.len(),
        });
    }
    labels
        .iter()
        .enumerate()
        .map(|(pos, l)| schema.encode(pos, l.as_ref()))
        .collect()
}

pub(crate) fn check_tuple(schema: &Schema, tuple: &[u32]) -> Result<(), DataError> {
    if tuple.len() != schema.len() {
        return Err(DataError::Arity {
            expected: schema.len(),
            found: tuple.len(),
        });
    }
    for (pos, &code) in tuple.iter().enumerate() {
        let attr = schema.attribute_at(pos);
        if code as usize >= attr.values.len() {
            return Err(DataError::OutOfDomain {
                attribute: attr.name.clone(),
                value: format!("#{code}"),
            });
        }
    }
    Ok(())
}
