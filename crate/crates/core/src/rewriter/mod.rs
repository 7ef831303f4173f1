//! Rewriting aggregate queries using views.
//!
//! COUNT and SUM queries are rewritten by covering the query body with
//! usable view instantiations ([`count_rewriting`], [`sum_rewriting`]); MAX
//! and MIN queries by a bucket search whose candidates are verified before
//! they are returned ([`max_rewriting`]). [`unfold`] and [`verify_rewriting`]
//! check a given rewriting against a query.

mod engine;
mod max;
mod unfold;
mod usable;
mod verify;

use std::collections::BTreeSet;

use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::eval::Database;
use crate::model::{AggKind, AggregateQuery, HeadExpr, Rewriting, Substitution, Term, ViewSet};

pub use engine::{count_rewriting, sum_rewriting};
pub use max::max_rewriting;
pub use unfold::{unfold, unfold_as};
pub use usable::{c_usability, c_usable, r_usable_matches, CUsability};
pub use verify::{check_candidate, verify_rewriting, verify_rewriting_with};

/// Search options shared by all rewriting algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Options {
    /// Also return rewritings that keep some base atoms.
    pub partial: bool,
    /// Backtrack exhaustively instead of stopping at the first rewriting.
    pub all: bool,
    /// Replace the query's comparisons by their deductive closure first.
    pub close_first: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            partial: false,
            all: false,
            close_first: true,
        }
    }
}

/// Result of checking a rewriting against a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The unfolding is isomorphic (or, for MAX/MIN, core-equivalent) to the
    /// query; carries the witnessing variable mapping.
    ProvedEquivalent(Substitution),
    RefutedByCounterexample(Database),
    RefutedByStructure(String),
    /// No decision procedure applies and random testing found no
    /// difference in this many trials.
    Unknown(usize),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::ProvedEquivalent(_) => "ProvedEquivalent",
            Verdict::RefutedByCounterexample(_) => "RefutedByCounterexample",
            Verdict::RefutedByStructure(_) => "RefutedByStructure",
            Verdict::Unknown(_) => "Unknown",
        }
    }

    pub fn is_refuted(&self) -> bool {
        matches!(
            self,
            Verdict::RefutedByCounterexample(_) | Verdict::RefutedByStructure(_)
        )
    }

    pub fn to_json(&self) -> Json {
        match self {
            Verdict::ProvedEquivalent(w) => json!({"kind": self.name(), "witness": w.to_string()}),
            Verdict::RefutedByCounterexample(d) => {
                json!({"kind": self.name(), "database": d.to_json()})
            }
            Verdict::RefutedByStructure(reason) => json!({"kind": self.name(), "reason": reason}),
            Verdict::Unknown(trials) => json!({"kind": self.name(), "trials": trials}),
        }
    }
}

/// Body variables of `v` that are not grouping variables. The aggregation
/// variable of an aggregate view is one of them.
pub fn nondistinguished_vars(v: &AggregateQuery) -> BTreeSet<String> {
    let head: BTreeSet<&str> = v.grouping.iter().map(String::as_str).collect();
    v.atom_vars()
        .into_iter()
        .filter(|x| !head.contains(x))
        .map(str::to_string)
        .collect()
}

/// Runs the algorithm for `kind` (or the query's own kind) and drops the
/// summation where the grouping variables determine every view key.
pub fn rewrite(
    q: &AggregateQuery,
    vs: &ViewSet,
    kind: Option<AggKind>,
    opts: Options,
) -> Result<Vec<Rewriting>> {
    let kind = match (kind, q.kind()) {
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => {
            return Err(Error::WrongQueryKind {
                expected: AggKind::Count,
                found: q.kind_name(),
                query: q.name.clone(),
            })
        }
    };
    let raw = match kind {
        AggKind::Count => count_rewriting(q, vs, opts)?,
        AggKind::Sum => sum_rewriting(q, vs, opts)?,
        AggKind::Max | AggKind::Min => max_rewriting(q, vs, opts)?,
    };
    Ok(raw.iter().map(|r| omit_summation(r, q)).collect())
}

/// Replaces `sum(...)` (or `max(Y)` over a MAX-view output) by the bare
/// product when every non-output body variable is a grouping variable, so
/// each group has exactly one derivation. Otherwise returns `r` unchanged.
pub fn omit_summation(r: &Rewriting, q: &AggregateQuery) -> Rewriting {
    let grouping: BTreeSet<&str> = r.grouping.iter().map(String::as_str).collect();
    let outputs: BTreeSet<&str> = r.output_vars().into_iter().collect();
    let body = r.body_vars();
    let determined = body
        .iter()
        .all(|v| grouping.contains(v.as_str()) || outputs.contains(v.as_str()));
    if !determined || r.view_atoms.is_empty() {
        return r.clone();
    }
    let kind = q.kind();
    let head = match &r.head {
        HeadExpr::Sum(f) if !f.is_empty() => HeadExpr::Product {
            factors: f.clone(),
            omitted: kind,
        },
        HeadExpr::Extremum(e, y) if outputs.contains(y.as_str()) => HeadExpr::Product {
            factors: vec![y.clone()],
            omitted: Some(e.kind()),
        },
        _ => return r.clone(),
    };
    Rewriting { head, ..r.clone() }
}

/// Allocates `Z1, Z2, ...` while skipping taken names.
pub(crate) struct Fresh {
    taken: BTreeSet<String>,
    next: usize,
}

impl Fresh {
    pub(crate) fn new(taken: impl IntoIterator<Item = String>) -> Self {
        Fresh {
            taken: taken.into_iter().collect(),
            next: 1,
        }
    }

    pub(crate) fn next(&mut self) -> String {
        loop {
            let name = format!("Z{}", self.next);
            self.next += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}

fn strings<T: ToString>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|x| x.to_string()).collect()
}

/// JSON form of a rewriting, with an optional verdict.
pub fn rewriting_to_json(r: &Rewriting, verdict: Option<&Verdict>) -> Json {
    let view_atoms: Vec<Json> = r
        .view_atoms
        .iter()
        .map(|a| json!({"view": a.view, "args": strings(&a.args), "output": a.output}))
        .collect();
    let provenance: Vec<Json> = r
        .provenance
        .iter()
        .map(|m| {
            json!({
                "view": m.view,
                "theta": m.theta.to_string(),
                "phi": m.phi.to_string(),
                "covers": strings(&m.image),
            })
        })
        .collect();
    json!({
        "rewriting": r.to_string(),
        "head": r.head.to_string(),
        "grouping": r.grouping,
        "view_atoms": view_atoms,
        "base_atoms": strings(&r.base_atoms),
        "comparisons": strings(&r.comparisons),
        "provenance": provenance,
        "verdict": verdict.map_or(Json::Null, Verdict::to_json),
    })
}

pub(crate) fn term_vars(terms: &[Term]) -> impl Iterator<Item = &str> {
    terms.iter().filter_map(Term::as_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_query, parse_rewriting, parse_views};

    #[test]
    fn nondistinguished() {
        let v = parse_query("v_jobs_per_ta(N1, C1; count) :- ta(N1, C1, J1).").unwrap();
        assert_eq!(
            nondistinguished_vars(&v),
            ["J1".to_string()].into_iter().collect()
        );
        let v = parse_query("v(X, Y) :- p(X, Y).").unwrap();
        assert!(nondistinguished_vars(&v).is_empty());
        let v = parse_query("v_all_sponsor(J1; count) :- salaries(J1, S1, A1), A1 > 0.").unwrap();
        assert_eq!(
            nondistinguished_vars(&v),
            ["A1".to_string(), "S1".to_string()].into_iter().collect()
        );
    }

    #[test]
    fn omit_summation_cases() {
        let vs = parse_views(
            "view v_positions_per_type(J; count) :- ta(N, C, J).\n\
             view w(X, W; count) :- p(X, W).",
        )
        .unwrap();
        let q = parse_query("q(J; count) :- ta(N, C, J).").unwrap();
        let r = parse_rewriting("r1(J; sum(Z)) :- v_positions_per_type(J; Z).", &vs).unwrap();
        assert_eq!(
            omit_summation(&r, &q).to_string(),
            "r1(J; Z) :- v_positions_per_type(J; Z)."
        );
        let q = parse_query("q(X; count) :- p(X, W).").unwrap();
        let r = parse_rewriting("r(X; sum(Z1)) :- w(X, W; Z1).", &vs).unwrap();
        assert_eq!(omit_summation(&r, &q), r);
    }

    #[test]
    fn fresh_names_skip_taken() {
        let mut f = Fresh::new(["Z1".to_string(), "Z3".to_string()]);
        assert_eq!(f.next(), "Z2");
        assert_eq!(f.next(), "Z4");
    }
}
