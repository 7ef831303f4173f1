//! Unfolding: replace view atoms by instantiated copies of their bodies.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{
    AggKind, AggregateQuery, AggregateTerm, Atom, Comparison, Extremum, HeadExpr, Rewriting,
    Substitution, Term, ViewSet,
};

fn malformed(r: &Rewriting, why: impl std::fmt::Display) -> Error {
    Error::MalformedRewriting(format!("`{}`: {why}", r.name))
}

/// Union-find over rewriting terms, used when a view head repeats a
/// variable and so equates two rewriting arguments.
#[derive(Default)]
struct Equalities {
    parent: BTreeMap<Term, Term>,
}

impl Equalities {
    fn find(&self, t: &Term) -> Term {
        let mut t = t.clone();
        while let Some(p) = self.parent.get(&t) {
            t = p.clone();
        }
        t
    }

    /// Records `a = b`; `protected` variables win as representatives and
    /// may not be bound to constants.
    fn union(
        &mut self,
        a: &Term,
        b: &Term,
        protected: &BTreeSet<String>,
    ) -> std::result::Result<(), String> {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return Ok(());
        }
        let guarded = |t: &Term| t.as_var().is_some_and(|v| protected.contains(v));
        match (&a, &b) {
            (Term::Var(_), Term::Var(_)) => {
                if guarded(&a) && guarded(&b) {
                    return Err(format!("view head equates grouping variables {a} and {b}"));
                }
                let (from, to) = if guarded(&a) { (b, a) } else { (a, b) };
                self.parent.insert(from, to);
            }
            (Term::Var(_), _) | (_, Term::Var(_)) => {
                let (var, c) = if a.is_var() { (a, b) } else { (b, a) };
                if guarded(&var) {
                    return Err(format!(
                        "view head equates grouping variable {var} with constant {c}"
                    ));
                }
                self.parent.insert(var, c);
            }
            _ => return Err(format!("view head equates distinct constants {a} and {b}")),
        }
        Ok(())
    }

    fn substitution(&self) -> Substitution {
        self.parent
            .keys()
            .filter_map(|k| k.as_var().map(|v| (v.to_string(), self.find(k))))
            .collect()
    }
}

/// How the head aggregate of the unfolding is derived.
enum HeadShape {
    SumLike(Vec<String>),
    Extremum(Extremum, String),
}

/// The unfolding of `r` over `vs`: each view atom is replaced by its body
/// with grouping variables instantiated and every other variable renamed
/// apart, and the head becomes the aggregate the candidate form computes.
pub fn unfold(r: &Rewriting, vs: &ViewSet) -> Result<AggregateQuery> {
    let shape = match &r.head {
        HeadExpr::Sum(f) => HeadShape::SumLike(f.clone()),
        HeadExpr::Product {
            factors,
            omitted: Some(AggKind::Count | AggKind::Sum),
        } => HeadShape::SumLike(factors.clone()),
        HeadExpr::Product {
            factors,
            omitted: Some(k @ (AggKind::Max | AggKind::Min)),
        } => {
            let [y] = factors.as_slice() else {
                return Err(malformed(
                    r,
                    format!("a {k} head takes exactly one variable"),
                ));
            };
            let e = if *k == AggKind::Max {
                Extremum::Max
            } else {
                Extremum::Min
            };
            HeadShape::Extremum(e, y.clone())
        }
        HeadExpr::Product { omitted: None, .. } => {
            return Err(malformed(
                r,
                "a bare product head needs the aggregate it abbreviates",
            ))
        }
        HeadExpr::Extremum(e, y) => HeadShape::Extremum(*e, y.clone()),
        HeadExpr::Root { .. } => return Err(malformed(r, "root heads have no unfolding")),
    };

    let mut views = Vec::new();
    for a in &r.view_atoms {
        let v = vs
            .get(&a.view)
            .ok_or_else(|| Error::UnknownView(a.view.clone()))?;
        if a.args.len() != v.grouping.len() {
            return Err(Error::ArityMismatch {
                predicate: a.view.clone(),
                expected: v.grouping.len(),
                found: a.args.len(),
            });
        }
        if a.output.is_some() != v.agg.is_some() {
            return Err(malformed(
                r,
                format!(
                    "view `{}` {} an output column",
                    v.name,
                    if v.agg.is_some() { "needs" } else { "has no" }
                ),
            ));
        }
        views.push(v);
    }

    // repeated view head variables equate rewriting arguments
    let protected: BTreeSet<String> = r
        .grouping
        .iter()
        .cloned()
        .chain(r.head.vars().into_iter().map(str::to_string))
        .collect();
    let mut eq = Equalities::default();
    for (a, v) in r.view_atoms.iter().zip(&views) {
        let mut first: BTreeMap<&str, &Term> = BTreeMap::new();
        for (g, t) in v.grouping.iter().zip(&a.args) {
            if let Some(prev) = first.insert(g, t) {
                eq.union(prev, t, &protected)
                    .map_err(|why| malformed(r, why))?;
            }
        }
    }
    let sigma = eq.substitution();

    let mut taken: BTreeSet<String> = r.body_vars();
    taken.extend(r.grouping.iter().cloned());
    let mut atoms: Vec<Atom> = r.base_atoms.iter().map(|a| sigma.apply_atom(a)).collect();
    let mut comparisons: Vec<Comparison> = Vec::new();
    let mut outputs = Substitution::new();
    let mut count_outputs = Vec::new();
    let mut agg_views: Vec<(AggKind, String)> = Vec::new();
    for (i, (a, v)) in r.view_atoms.iter().zip(&views).enumerate() {
        let mut theta = Substitution::new();
        for (g, t) in v.grouping.iter().zip(&a.args) {
            theta.insert(g.clone(), sigma.apply_term(t));
        }
        for w in v.atom_vars() {
            if theta.contains(w) {
                continue;
            }
            let mut name = format!("{w}_{}", i + 1);
            while taken.contains(&name) {
                name.push('_');
            }
            taken.insert(name.clone());
            theta.insert(w, Term::Var(name));
        }
        atoms.extend(v.atoms.iter().map(|b| theta.apply_atom(b)));
        comparisons.extend(v.comparisons.iter().map(|c| theta.apply_comparison(c)));
        if let (Some(z), Some(agg)) = (&a.output, &v.agg) {
            match agg.var() {
                Some(y) => {
                    outputs.insert(z.clone(), theta.apply_var(y));
                    agg_views.push((agg.kind(), z.clone()));
                }
                None => count_outputs.push(z.clone()),
            }
        }
    }
    let rename = sigma.then(&outputs);
    for c in &r.comparisons {
        if count_outputs.iter().any(|z| c.mentions(z)) {
            return Err(malformed(
                r,
                format!("comparison {c} constrains a COUNT output"),
            ));
        }
        comparisons.push(rename.apply_comparison(c));
    }
    for b in &r.base_atoms {
        if count_outputs.iter().any(|z| b.mentions(z)) {
            return Err(malformed(r, format!("base atom {b} uses a COUNT output")));
        }
    }

    let agg = match shape {
        HeadShape::SumLike(factors) => {
            if views.iter().any(|v| v.agg.is_none()) {
                return Err(malformed(r, "non-aggregate views cannot occur under a sum"));
            }
            if agg_views.iter().any(|(k, _)| *k != AggKind::Sum) {
                return Err(malformed(
                    r,
                    "only COUNT and SUM views can occur under a sum",
                ));
            }
            let mut rest = Vec::new();
            let mut seen = BTreeSet::new();
            for f in &factors {
                if count_outputs.contains(f) {
                    if !seen.insert(f.as_str()) {
                        return Err(malformed(
                            r,
                            format!("COUNT output {f} occurs twice in the head"),
                        ));
                    }
                } else {
                    rest.push(f);
                }
            }
            if let Some(z) = count_outputs.iter().find(|z| !seen.contains(z.as_str())) {
                return Err(malformed(
                    r,
                    format!("COUNT output {z} is missing from the head"),
                ));
            }
            match rest.as_slice() {
                [] => AggregateTerm::Count,
                [y] => match rename.apply_var(y) {
                    Term::Var(v) => AggregateTerm::Sum(v),
                    t => return Err(malformed(r, format!("cannot sum over constant {t}"))),
                },
                _ => {
                    return Err(malformed(
                        r,
                        "a sum head has at most one factor besides the COUNT outputs",
                    ))
                }
            }
        }
        HeadShape::Extremum(e, y) => {
            if !count_outputs.is_empty() || agg_views.iter().any(|(k, _)| *k != e.kind()) {
                return Err(malformed(
                    r,
                    format!(
                        "only non-aggregate and {} views can occur under {}",
                        e.kind(),
                        e.keyword()
                    ),
                ));
            }
            if agg_views.len() > 1 {
                return Err(malformed(r, format!("at most one {} view", e.kind())));
            }
            let y = match rename.apply_var(&y) {
                Term::Var(v) => v,
                t => return Err(malformed(r, format!("cannot aggregate constant {t}"))),
            };
            match e {
                Extremum::Max => AggregateTerm::Max(y),
                Extremum::Min => AggregateTerm::Min(y),
            }
        }
    };
    let grouping = r
        .grouping
        .iter()
        .map(|g| match sigma.apply_var(g) {
            Term::Var(v) => Ok(v),
            t => Err(malformed(
                r,
                format!("grouping variable {g} is bound to {t}"),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    AggregateQuery::new(
        format!("{}_unfolded", r.name),
        grouping,
        Some(agg),
        atoms,
        comparisons,
    )
}

/// [`unfold`], reading a bare product head as an abbreviation of `kind`.
pub fn unfold_as(r: &Rewriting, vs: &ViewSet, kind: AggKind) -> Result<AggregateQuery> {
    match &r.head {
        HeadExpr::Product {
            factors,
            omitted: None,
        } => {
            let head = HeadExpr::Product {
                factors: factors.clone(),
                omitted: Some(kind),
            };
            unfold(&Rewriting { head, ..r.clone() }, vs)
        }
        _ => unfold(r, vs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::isomorphic_queries;
    use crate::parser::{parse_query, parse_rewriting, parse_views};

    #[test]
    fn positions_per_type() {
        let vs = parse_views("v_positions_per_type(J; count) :- ta(N, C, J).").unwrap();
        let r = parse_rewriting("r1(J1; Z) :- v_positions_per_type(J1; Z).", &vs).unwrap();
        assert!(unfold(&r, &vs).is_err());
        let u = unfold_as(&r, &vs, AggKind::Count).unwrap();
        assert_eq!(u.to_string(), "r1_unfolded(J1; count) :- ta(N_1, C_1, J1).");
    }

    #[test]
    fn salary_pipeline_is_isomorphic_to_query() {
        let vs = parse_views(
            "v_salary_for_ta_job(J; sum(A)) :- salaries(J, S, A).\n\
             v_positions_per_type(J; count) :- ta(N, C, J).",
        )
        .unwrap();
        let r = parse_rewriting(
            "r(J; sum(A*Cnt)) :- v_salary_for_ta_job(J; A), v_positions_per_type(J; Cnt).",
            &vs,
        )
        .unwrap();
        let u = unfold(&r, &vs).unwrap();
        assert_eq!(u.agg, Some(AggregateTerm::Sum("A_1".into())));
        let q = parse_query("q(J; sum(A)) :- ta(N, C, J), salaries(J, S, A).").unwrap();
        assert!(isomorphic_queries(&q, &u).unwrap().is_some());
    }

    #[test]
    fn fresh_locals_per_occurrence() {
        let vs = parse_views(
            "v1(X, U; count) :- p1(X), p2(Y), X < Y, Y < 2, p3(U), U < 2.\n\
             v2(X, U; count) :- p3(U), p4(W), U < W, W < 2, p1(X), X < 2.",
        )
        .unwrap();
        let r = parse_rewriting("r(; sum(Z1*Z2)) :- v1(X, U; Z1), v2(X, U; Z2).", &vs).unwrap();
        let u = unfold(&r, &vs).unwrap();
        assert_eq!(u.kind(), Some(AggKind::Count));
        assert_eq!(u.atoms.len(), 6);
        assert!(u.atom_vars().contains("Y_1"));
        assert!(u.atom_vars().contains("W_2"));
    }

    #[test]
    fn repeated_head_variable_unifies_arguments() {
        let vs = parse_views("v(X, X; count) :- p(X, Y).").unwrap();
        let r = parse_rewriting("r(A; sum(Z)) :- v(A, B; Z), s(B).", &vs).unwrap();
        let u = unfold(&r, &vs).unwrap();
        assert_eq!(u.to_string(), "r_unfolded(A; count) :- s(A), p(A, Y_1).");
    }

    #[test]
    fn malformed_heads() {
        let vs = parse_views("v(X; count) :- p(X, Y).\nw(X, Y) :- p(X, Y).").unwrap();
        for text in [
            "r(X; sum(Z*Z)) :- v(X; Z).",
            "r(X; sum(Y)) :- w(X, Y).",
            "r(X; count) :- v(X; Z).",
            "r(X; max(Z)) :- v(X; Z).",
        ] {
            let r = parse_rewriting(text, &vs).unwrap();
            assert!(
                matches!(unfold(&r, &vs), Err(Error::MalformedRewriting(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn max_view_output_becomes_aggregation_variable() {
        let vs = parse_views("vm(X; max(Y)) :- p(X, Y).").unwrap();
        let r = parse_rewriting("r(X; max(M)) :- vm(X; M).", &vs).unwrap();
        assert_eq!(
            unfold(&r, &vs).unwrap().to_string(),
            "r_unfolded(X; max(Y_1)) :- p(X, Y_1)."
        );
    }
}
