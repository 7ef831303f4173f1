//! Homomorphism and isomorphism search between query bodies.
//!
//! All searches are lazy, deterministic backtracking over source atoms. The
//! source atoms are visited most-constrained first (constants and already
//! bound variables); target atoms are tried in input order.

use std::collections::BTreeSet;

use crate::constraints::{
    deductive_closure_with, equivalent_constraints, ConstraintSet, OrderGraph,
};
use crate::error::{Error, Result};
use crate::model::{dedup, AggregateQuery, Atom, Substitution, Term};

/// A view instantiation `θ` plus the isomorphism `φ` of its nondistinguished
/// variables, and the body atoms `R′` covered by `φθR_v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Match {
    pub view: String,
    pub theta: Substitution,
    pub phi: Substitution,
    pub image: Vec<Atom>,
}

impl Match {
    /// `φθ` as a single substitution on view variables.
    pub fn mapping(&self) -> Substitution {
        self.theta.then(&self.phi)
    }
}

/// A body mapping and the indices of the target atoms it hits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BodyMapping {
    pub mapping: Substitution,
    pub image: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Restrict {
    /// Variables that must map to variables, injectively, and onto terms no
    /// other variable maps to.
    pub injective: BTreeSet<String>,
    /// Distinct source atoms must hit distinct target atoms.
    pub distinct_targets: bool,
}

struct Frame {
    next: usize,
    subst: Substitution,
    used: Vec<usize>,
}

/// Lazy backtracking search for substitutions mapping every source atom onto
/// a target atom.
pub(crate) struct Search<'a> {
    src: Vec<&'a Atom>,
    dst: Vec<(usize, &'a Atom)>,
    restrict: Restrict,
    stack: Vec<Frame>,
    pending_empty: Option<Substitution>,
}

fn search_order<'a>(src: &[&'a Atom], fixed: &Substitution) -> Vec<&'a Atom> {
    let mut bound: BTreeSet<&str> = fixed.iter().map(|(v, _)| v.as_str()).collect();
    let mut remaining: Vec<&Atom> = src.to_vec();
    let mut out = Vec::with_capacity(src.len());
    while !remaining.is_empty() {
        let score = |a: &Atom| {
            a.args
                .iter()
                .filter(|t| match t {
                    Term::Var(v) => bound.contains(v.as_str()),
                    _ => true,
                })
                .count()
        };
        let mut best = 0;
        for (i, a) in remaining.iter().enumerate() {
            if score(a) > score(remaining[best]) {
                best = i;
            }
        }
        let picked = remaining.remove(best);
        bound.extend(picked.vars());
        out.push(picked);
    }
    out
}

impl<'a> Search<'a> {
    pub(crate) fn new(
        src: &'a [Atom],
        dst: &'a [Atom],
        fixed: &Substitution,
        restrict: Restrict,
    ) -> Self {
        let src_unique: Vec<&Atom> = {
            let mut seen = BTreeSet::new();
            src.iter().filter(|a| seen.insert(*a)).collect()
        };
        let dst_unique: Vec<(usize, &Atom)> = {
            let mut seen = BTreeSet::new();
            dst.iter()
                .enumerate()
                .filter(|(_, a)| seen.insert(*a))
                .collect()
        };
        let src = search_order(&src_unique, fixed);
        let mut search = Search {
            src,
            dst: dst_unique,
            restrict,
            stack: Vec::new(),
            pending_empty: None,
        };
        if search.src.is_empty() {
            search.pending_empty = Some(fixed.clone());
        } else {
            search.stack.push(Frame {
                next: 0,
                subst: fixed.clone(),
                used: Vec::new(),
            });
        }
        search
    }

    fn extend(&self, s: &Substitution, a: &Atom, b: &Atom) -> Option<Substitution> {
        if a.predicate != b.predicate || a.arity() != b.arity() {
            return None;
        }
        let mut s = s.clone();
        for (t, u) in a.args.iter().zip(&b.args) {
            match t {
                Term::Var(v) => match s.get(v) {
                    Some(bound) if bound == u => {}
                    Some(_) => return None,
                    None => {
                        if self.restrict.injective.contains(v) {
                            if !u.is_var() || s.iter().any(|(_, w)| w == u) {
                                return None;
                            }
                        } else if s
                            .iter()
                            .any(|(w, img)| img == u && self.restrict.injective.contains(w))
                        {
                            return None;
                        }
                        s.insert(v.clone(), u.clone());
                    }
                },
                c if c == u => {}
                _ => return None,
            }
        }
        Some(s)
    }
}

impl Iterator for Search<'_> {
    type Item = BodyMapping;

    fn next(&mut self) -> Option<BodyMapping> {
        if let Some(s) = self.pending_empty.take() {
            return Some(BodyMapping {
                mapping: s,
                image: Vec::new(),
            });
        }
        loop {
            let depth = self.stack.len().checked_sub(1)?;
            let top = self.stack.last_mut().expect("nonempty");
            if top.next >= self.dst.len() {
                self.stack.pop();
                continue;
            }
            let j = top.next;
            top.next += 1;
            let (index, target) = self.dst[j];
            if self.restrict.distinct_targets && top.used.contains(&index) {
                continue;
            }
            let top = &self.stack[depth];
            let Some(s) = self.extend(&top.subst, self.src[depth], target) else {
                continue;
            };
            let mut used = top.used.clone();
            used.push(index);
            if depth + 1 == self.src.len() {
                used.sort_unstable();
                used.dedup();
                return Some(BodyMapping {
                    mapping: s,
                    image: used,
                });
            }
            self.stack.push(Frame {
                next: 0,
                subst: s,
                used,
            });
        }
    }
}

/// All extensions of `fixed` that map every `src` atom onto some `dst` atom.
pub fn find_homomorphisms<'a>(
    src: &'a [Atom],
    dst: &'a [Atom],
    fixed: &Substitution,
) -> impl Iterator<Item = Substitution> + 'a {
    Search::new(src, dst, fixed, Restrict::default()).map(|m| m.mapping)
}

/// Extensions of `fixed` mapping the unfixed variables of `src` injectively
/// to fresh variables of `dst`, and `src` atoms one-to-one onto a subset of
/// `dst`.
pub fn find_body_isomorphisms<'a>(
    src: &'a [Atom],
    dst: &'a [Atom],
    fixed: &Substitution,
) -> impl Iterator<Item = BodyMapping> + 'a {
    let injective = src
        .iter()
        .flat_map(Atom::vars)
        .filter(|v| !fixed.contains(v))
        .map(str::to_string)
        .collect();
    Search::new(
        src,
        dst,
        fixed,
        Restrict {
            injective,
            distinct_targets: true,
        },
    )
}

/// Maps head positions of `q1` onto those of `q2`, including the aggregation
/// variable. `None` when two positions clash.
fn head_map(q1: &AggregateQuery, q2: &AggregateQuery) -> Option<Substitution> {
    let mut s = Substitution::new();
    let mut pairs: Vec<(&str, &str)> = q1
        .grouping
        .iter()
        .zip(&q2.grouping)
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    pairs.extend(q1.agg_var().zip(q2.agg_var()));
    for (a, b) in pairs {
        match s.get(a) {
            Some(Term::Var(x)) if x == b => {}
            Some(_) => return None,
            None => {
                s.insert(a, Term::var(b));
            }
        }
    }
    Some(s)
}

fn closed(q: &AggregateQuery, constants: &BTreeSet<num::BigRational>) -> ConstraintSet {
    let c = ConstraintSet::from(q.comparisons.as_slice());
    deductive_closure_with(&c, constants.iter().cloned()).unwrap_or(c)
}

/// A variable bijection making `q1` and `q2` identical up to equivalent
/// (deductively closed) comparisons, if one exists.
pub fn isomorphic_queries(
    q1: &AggregateQuery,
    q2: &AggregateQuery,
) -> Result<Option<Substitution>> {
    if q1.kind() != q2.kind() {
        return Err(Error::AggregateMismatch(format!(
            "`{}` is {} but `{}` is {}",
            q1.name,
            q1.kind_name(),
            q2.name,
            q2.kind_name()
        )));
    }
    if q1.grouping.len() != q2.grouping.len() {
        return Err(Error::AggregateMismatch(format!(
            "`{}` groups by {} variables but `{}` by {}",
            q1.name,
            q1.grouping.len(),
            q2.name,
            q2.grouping.len()
        )));
    }
    let a1 = dedup(&q1.atoms);
    let a2 = dedup(&q2.atoms);
    if a1.len() != a2.len() || q1.atom_vars().len() != q2.atom_vars().len() {
        return Ok(None);
    }
    let Some(fixed) = head_map(q1, q2) else {
        return Ok(None);
    };
    let images: BTreeSet<&Term> = fixed.iter().map(|(_, t)| t).collect();
    if images.len() != fixed.len() {
        return Ok(None);
    }
    let mut constants = q1.rational_constants();
    constants.extend(q2.rational_constants());
    let c1 = closed(q1, &constants);
    let c2 = closed(q2, &constants);
    for m in find_body_isomorphisms(&a1, &a2, &fixed) {
        if m.image.len() != a2.len() {
            continue;
        }
        let mapped: ConstraintSet = c1.iter().map(|c| m.mapping.apply_comparison(c)).collect();
        if equivalent_constraints(&mapped, &c2) {
            return Ok(Some(m.mapping));
        }
    }
    Ok(None)
}

/// Head-respecting homomorphism from `from` to `to` whose mapped comparisons
/// are entailed by `to`'s comparisons. Its existence shows `to ⊆ from` under
/// set semantics.
pub fn containment_mapping(from: &AggregateQuery, to: &AggregateQuery) -> Option<Substitution> {
    let from = if from.agg.is_some() {
        from.core()
    } else {
        from.clone()
    };
    let to = if to.agg.is_some() {
        to.core()
    } else {
        to.clone()
    };
    if from.grouping.len() != to.grouping.len() {
        return None;
    }
    let fixed = head_map(&from, &to)?;
    let mut constants = from.rational_constants();
    constants.extend(to.rational_constants());
    let graph = OrderGraph::build(&to.comparisons, constants.into_iter().map(Term::Num));
    let found = find_homomorphisms(&from.atoms, &to.atoms, &fixed).find(|h| {
        from.comparisons
            .iter()
            .all(|c| graph.entails(&h.apply_comparison(c)))
    });
    found
}

/// Set equivalence of two comparison-free queries: homomorphisms both ways.
/// Aggregate queries are compared through their cores.
pub fn set_equivalent_relational(q1: &AggregateQuery, q2: &AggregateQuery) -> Result<bool> {
    for q in [q1, q2] {
        if !q.is_relational() {
            return Err(Error::HasComparisons(q.name.clone()));
        }
    }
    Ok(containment_mapping(q1, q2).is_some() && containment_mapping(q2, q1).is_some())
}
