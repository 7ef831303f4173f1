use thiserror::Error;

use crate::model::AggKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },

    #[error("arity mismatch for `{predicate}`: expected {expected}, found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },

    #[error("unsafe query `{query}`: variable {var} does not occur in a relational body atom")]
    UnsafeQuery { query: String, var: String },

    #[error("inconsistent ground constraint: {0}")]
    InconsistentGround(String),

    #[error("type error: {0}")]
    TypeError(String),

    #[error("unsupported SQL: {0}")]
    UnsupportedSql(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("SELECT and GROUP BY attributes differ: {0}")]
    GroupByMismatch(String),

    #[error("constraint set is inconsistent")]
    InconsistentInput,

    #[error("aggregate mismatch: {0}")]
    AggregateMismatch(String),

    #[error("query `{0}` has comparisons; only relational queries are supported here")]
    HasComparisons(String),

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("unknown view `{0}`")]
    UnknownView(String),

    #[error("invalid view set: {0}")]
    InvalidViews(String),

    #[error("expected a {expected} query, `{query}` is {found}")]
    WrongQueryKind {
        expected: AggKind,
        found: String,
        query: String,
    },

    #[error("malformed rewriting: {0}")]
    MalformedRewriting(String),

    #[error("invalid database: {0}")]
    InvalidDatabase(String),
}
