//! Checking a rewriting against a query.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::eval::{oracle_equivalent, Evaluate, Verdict as Oracle};
use crate::matcher::{containment_mapping, isomorphic_queries};
use crate::model::{AggKind, AggregateQuery, HeadExpr, Rewriting, ViewSet};

use super::unfold::unfold_as;
use super::{omit_summation, Verdict};

/// Checks that `r` has one of the candidate forms for `q`'s aggregate.
/// `Err` carries the reason it does not.
pub fn check_candidate(
    q: &AggregateQuery,
    r: &Rewriting,
    vs: &ViewSet,
) -> std::result::Result<(), String> {
    let kind = q.kind().ok_or("the query has no aggregate")?;
    if r.grouping.len() != q.grouping.len() {
        return Err(format!(
            "the rewriting groups by {} variables, the query by {}",
            r.grouping.len(),
            q.grouping.len()
        ));
    }
    if r.view_atoms.is_empty() {
        return Err("no view atom".into());
    }
    if let HeadExpr::Root { degree, .. } = &r.head {
        return Err(format!(
            "a degree-{degree} root of a product is not a candidate head"
        ));
    }

    // every output occurs exactly once in the body
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    let body_atoms = r.body_atoms();
    for a in &body_atoms {
        for t in &a.args {
            if let Some(v) = t.as_var() {
                *occurrences.entry(v).or_default() += 1;
            }
        }
    }
    let mut counts = Vec::new();
    let mut aggregates = Vec::new();
    for a in &r.view_atoms {
        let v = vs
            .get(&a.view)
            .ok_or_else(|| format!("unknown view `{}`", a.view))?;
        if a.output.is_some() != v.agg.is_some() {
            return Err(format!(
                "view atom `{}` has the wrong number of arguments",
                a.view
            ));
        }
        if let Some(z) = &a.output {
            if occurrences.get(z.as_str()) != Some(&1) || r.grouping.contains(z) {
                return Err(format!("output {z} of `{}` is not fresh", a.view));
            }
            if r.comparisons.iter().any(|c| c.mentions(z)) && v.kind() == Some(AggKind::Count) {
                return Err(format!("COUNT output {z} is constrained"));
            }
        }
        match v.kind() {
            Some(AggKind::Count) => counts.push(a.output.clone().unwrap_or_default()),
            Some(k) => aggregates.push((k, a.output.clone().unwrap_or_default())),
            None => {}
        }
    }
    let non_aggregate = r.view_atoms.len() - counts.len() - aggregates.len();
    let visible = |y: &str| {
        r.view_atoms.iter().any(|a| a.arg_vars().any(|v| v == y))
            || r.base_atoms.iter().any(|a| a.mentions(y))
    };

    let factors: Vec<String> = match (&r.head, kind) {
        (HeadExpr::Sum(f), AggKind::Count | AggKind::Sum) => f.clone(),
        (HeadExpr::Extremum(e, y), AggKind::Max | AggKind::Min) if e.kind() == kind => {
            vec![y.clone()]
        }
        (HeadExpr::Product { factors, omitted }, _)
            if omitted.is_none() || *omitted == Some(kind) =>
        {
            let mut raw = r.clone();
            raw.head = match kind {
                AggKind::Count | AggKind::Sum => HeadExpr::Sum(factors.clone()),
                AggKind::Max | AggKind::Min => match factors.as_slice() {
                    [y] => HeadExpr::Extremum(
                        if kind == AggKind::Max {
                            crate::model::Extremum::Max
                        } else {
                            crate::model::Extremum::Min
                        },
                        y.clone(),
                    ),
                    _ => return Err(format!("a {kind} product head takes one variable")),
                },
            };
            if omit_summation(&raw, q).head == raw.head {
                return Err("the aggregation can only be dropped when the grouping variables fix every view key".into());
            }
            factors.clone()
        }
        (h, _) => return Err(format!("head `{h}` does not fit a {kind} query")),
    };

    match kind {
        AggKind::Count => {
            if non_aggregate > 0 || !aggregates.is_empty() {
                return Err("a COUNT rewriting uses COUNT views only".into());
            }
            let mut want = counts.clone();
            let mut got = factors.clone();
            want.sort();
            got.sort();
            if want != got {
                return Err("the head must multiply each COUNT output exactly once".into());
            }
        }
        AggKind::Sum => {
            if non_aggregate > 0 || aggregates.iter().any(|(k, _)| *k != AggKind::Sum) {
                return Err("a SUM rewriting uses COUNT views and at most one SUM view".into());
            }
            if aggregates.len() > 1 {
                return Err("a SUM rewriting uses at most one SUM view".into());
            }
            let rest: Vec<&String> = factors.iter().filter(|f| !counts.contains(f)).collect();
            let count_set: BTreeSet<&String> =
                factors.iter().filter(|f| counts.contains(f)).collect();
            if count_set.len() != counts.len()
                || factors.len() != counts.len() + 1
                || rest.len() != 1
            {
                return Err("the head must be one summed variable times each COUNT output".into());
            }
            let y = rest[0];
            match aggregates.first() {
                Some((_, out)) if out != y => {
                    return Err(format!(
                        "the head sums {y}, not the SUM view's output {out}"
                    ))
                }
                None if !visible(y) => {
                    return Err(format!("{y} does not occur among the view arguments"))
                }
                _ => {}
            }
        }
        AggKind::Max | AggKind::Min => {
            if !counts.is_empty() || aggregates.iter().any(|(k, _)| *k != kind) {
                return Err(format!(
                    "a {kind} rewriting uses non-aggregate views and at most one {kind} view"
                ));
            }
            if aggregates.len() > 1 {
                return Err(format!("a {kind} rewriting uses at most one {kind} view"));
            }
            let y = &factors[0];
            match aggregates.first() {
                Some((_, out)) if out != y => {
                    return Err(format!(
                        "the head aggregates {y}, not the view output {out}"
                    ))
                }
                None if !visible(y) => {
                    return Err(format!("{y} does not occur among the view arguments"))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// [`verify_rewriting_with`] with 200 oracle trials from seed 0.
pub fn verify_rewriting(q: &AggregateQuery, r: &Rewriting, vs: &ViewSet) -> Result<Verdict> {
    verify_rewriting_with(q, r, vs, 200, 0)
}

/// Decides `q ≡ r` modulo `vs` where a decision procedure applies and falls
/// back to random testing elsewhere.
///
/// COUNT and SUM: isomorphism of `q` and the unfolding. That is complete
/// when both are relational or both linear; otherwise a failed isomorphism
/// only sends the pair to the oracle. MAX and MIN: equivalence of cores,
/// decided by homomorphisms both ways when both are relational; with
/// comparisons, mutual containment mappings prove equivalence and the
/// oracle handles the rest.
pub fn verify_rewriting_with(
    q: &AggregateQuery,
    r: &Rewriting,
    vs: &ViewSet,
    trials: usize,
    seed: u64,
) -> Result<Verdict> {
    if let Err(reason) = check_candidate(q, r, vs) {
        return Ok(Verdict::RefutedByStructure(reason));
    }
    let kind = q.kind().expect("candidate check requires an aggregate");
    let u = unfold_as(r, vs, kind)?;
    let oracle = |fallback: Verdict| -> Result<Verdict> {
        Ok(
            match oracle_equivalent(q as &dyn Evaluate, r as &dyn Evaluate, vs, trials, seed)? {
                Oracle::Counterexample(d) => Verdict::RefutedByCounterexample(d),
                Oracle::NoCounterexampleFound { .. } => fallback,
            },
        )
    };
    match kind {
        AggKind::Count | AggKind::Sum => {
            if q.grouping.len() != u.grouping.len() {
                return Ok(Verdict::RefutedByStructure("grouping arity differs".into()));
            }
            if let Some(w) = isomorphic_queries(q, &u)? {
                return Ok(Verdict::ProvedEquivalent(w));
            }
            let decidable =
                (q.is_relational() && u.is_relational()) || (q.is_linear() && u.is_linear());
            if decidable {
                oracle(Verdict::RefutedByStructure(
                    "the unfolding is not isomorphic to the query".into(),
                ))
            } else {
                oracle(Verdict::Unknown(trials))
            }
        }
        AggKind::Max | AggKind::Min => {
            let there = containment_mapping(q, &u);
            let back = containment_mapping(&u, q);
            if let (Some(w), Some(_)) = (&there, &back) {
                return Ok(Verdict::ProvedEquivalent(w.clone()));
            }
            if q.is_relational() && u.is_relational() {
                oracle(Verdict::RefutedByStructure(
                    "the cores of the query and the unfolding are not set-equivalent".into(),
                ))
            } else {
                oracle(Verdict::Unknown(trials))
            }
        }
    }
}
