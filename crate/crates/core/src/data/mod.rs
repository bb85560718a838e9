//! Relational substrate: schemas, datasets, predicates and group-by queries.

mod dataset;
mod predicate;
mod query;
mod schema;

pub use dataset::Dataset;
pub use predicate::{evaluate_predicate, Atom, BoundAtom, BoundPredicate, Comparator, Predicate};
pub use query::{
    group_tuples, true_aggregate, Aggregate, BoundQuestion, GroupByQuery, GroupStats, QueryPlan,
    UserQuestion, WeightedGroup,
};
pub use schema::{AttributeDomain, AttributeKind, Schema};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("malformed schema document: {0}")]
    SchemaFormat(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("value `{value}` is not in the domain of `{attribute}`")]
    OutOfDomain { attribute: String, value: String },
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<DataError>,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("tuple has {found} values, schema declares {expected}")]
    Arity { expected: usize, found: usize },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("invalid question: {0}")]
    InvalidQuestion(String),
}
