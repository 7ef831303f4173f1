//! Rewriting conjunctive aggregate queries (COUNT, SUM, MAX, MIN) using
//! materialized views.
//!
//! The crate parses an extended Datalog notation (and a small SQL dialect),
//! decides order constraints over the rationals, searches for view-based
//! rewritings, and checks proposed rewritings by unfolding them and either
//! matching them structurally or testing them on random databases.

pub mod constraints;
pub mod error;
pub mod eval;
pub mod gen;
pub mod matcher;
pub mod model;
pub mod parser;
pub mod rewriter;
pub mod sql;

pub use constraints::{
    consistent, deductive_closure, equivalent_constraints, implies, ConstraintSet,
};
pub use error::{Error, Result};
pub use eval::{
    eval_aggregate, eval_core_bag, eval_rewriting, extend_database, oracle_equivalent,
    oracle_equivalent_with, random_database, Database, Evaluate, SizeParams, Value,
    Verdict as OracleVerdict,
};
pub use matcher::{
    containment_mapping, find_body_isomorphisms, find_homomorphisms, isomorphic_queries,
    set_equivalent_relational, Match,
};
pub use model::{
    AggKind, AggregateQuery, AggregateTerm, Atom, CmpOp, Comparison, Extremum, HeadExpr, Rewriting,
    Substitution, Term, ViewAtom, ViewSet,
};
pub use parser::{
    parse_comparisons, parse_program, parse_query, parse_rewriting, parse_views, Program,
};
pub use rewriter::{
    c_usability, c_usable, check_candidate, count_rewriting, max_rewriting, nondistinguished_vars,
    omit_summation, r_usable_matches, rewrite, rewriting_to_json, sum_rewriting, unfold, unfold_as,
    verify_rewriting, verify_rewriting_with, CUsability, Options, Verdict,
};
pub use sql::{
    datalog_to_sql, parse_schema, sql_text_to_datalog, sql_to_datalog, Schema, SqlQuery,
};
