//! The covering search behind COUNT and SUM rewriting.

use std::collections::BTreeSet;

use crate::constraints::{deductive_closure_with, implies_all, ConstraintSet};
use crate::error::{Error, Result};
use crate::matcher::Match;
use crate::model::{
    dedup, AggKind, AggregateQuery, Atom, Comparison, HeadExpr, Rewriting, Term, ViewAtom, ViewSet,
};

use super::usable::{c_usability, usable_matches};
use super::{term_vars, Fresh, Options};

/// Per-branch state of the covering loop. `r` is the query body as the
/// search has shrunk it; atoms with a hidden variable leave it for good.
#[derive(Clone)]
struct Branch {
    r: Vec<Atom>,
    not_covered: Vec<Atom>,
    c: Vec<Comparison>,
    chosen: Vec<(usize, Match)>,
    visible: BTreeSet<String>,
    sum_used: bool,
}

struct Engine<'a> {
    q: &'a AggregateQuery,
    views: Vec<&'a AggregateQuery>,
    /// The SUM query's aggregation variable when SUM views may be used.
    y: Option<&'a str>,
    opts: Options,
    found: Vec<Rewriting>,
    seen: BTreeSet<String>,
}

impl Engine<'_> {
    fn done(&self) -> bool {
        !self.opts.all && !self.found.is_empty()
    }

    fn step(&mut self, b: Branch) {
        if self.done() {
            return;
        }
        if !b.chosen.is_empty() && (b.not_covered.is_empty() || self.opts.partial) {
            self.emit(&b);
            if self.done() || b.not_covered.is_empty() {
                return;
            }
        }
        for (vi, v) in self.views.clone().into_iter().enumerate() {
            let is_sum = v.kind() == Some(AggKind::Sum);
            let target = match (is_sum, self.y) {
                (false, _) => None,
                (true, Some(y)) if !b.sum_used && !b.visible.contains(y) => Some(y.to_string()),
                (true, _) => continue,
            };
            let mut elsewhere: BTreeSet<String> = self.q.grouping.iter().cloned().collect();
            elsewhere.extend(self.y.map(str::to_string));
            elsewhere.extend(b.visible.iter().cloned());
            let matches: Vec<Match> = usable_matches(v, &b.r, elsewhere, target).collect();
            for m in matches {
                if self.done() {
                    return;
                }
                let covers_first = m.image.contains(&b.not_covered[0]);
                let covers_any = m.image.iter().any(|a| b.not_covered.contains(a));
                if !covers_any || (!self.opts.partial && !covers_first) {
                    continue;
                }
                if !c_usability(v, &m, &b.c).holds() {
                    continue;
                }
                if let Some(next) = apply(&b, v, vi, m, is_sum) {
                    self.step(next);
                }
            }
        }
    }

    fn emit(&mut self, b: &Branch) {
        let mut chosen = b.chosen.clone();
        chosen.sort_by_key(|(vi, _)| *vi);
        let mut fresh = Fresh::new(self.q.atom_vars().into_iter().map(str::to_string));
        let mut view_atoms = Vec::new();
        let mut zs = Vec::new();
        let mut scalar = None;
        for (vi, m) in &chosen {
            let v = self.views[*vi];
            let output = if v.kind() == Some(AggKind::Sum) {
                let y = self.y.expect("SUM views only in SUM mode").to_string();
                scalar = Some(y.clone());
                y
            } else {
                let z = fresh.next();
                zs.push(z.clone());
                z
            };
            view_atoms.push(ViewAtom {
                view: v.name.clone(),
                args: v.grouping.iter().map(|g| m.theta.apply_var(g)).collect(),
                output: Some(output),
            });
        }
        let base_atoms = b.not_covered.clone();
        let head = match self.y {
            None => HeadExpr::Sum(zs),
            Some(y) => {
                if scalar.is_none() {
                    let in_base = base_atoms.iter().any(|a| a.mentions(y));
                    if !b.visible.contains(y) && !in_base {
                        return;
                    }
                }
                let mut f = vec![y.to_string()];
                f.extend(zs);
                HeadExpr::Sum(f)
            }
        };
        let inherited: Vec<Comparison> = chosen
            .iter()
            .flat_map(|(vi, m)| {
                let mapping = m.mapping();
                self.views[*vi]
                    .comparisons
                    .iter()
                    .map(move |c| mapping.apply_comparison(c))
            })
            .collect();
        let r = Rewriting {
            name: format!("r_{}", self.q.name),
            grouping: self.q.grouping.clone(),
            head,
            view_atoms,
            base_atoms,
            comparisons: minimize(&b.c, &inherited),
            provenance: chosen.into_iter().map(|(_, m)| m).collect(),
        };
        if self.seen.insert(format!("{:?}", r.canonical())) {
            self.found.push(r);
        }
    }
}

/// Lines 7 to 12 of the covering loop for one chosen match. `None` when a
/// covered atom with a hidden variable was already covered.
fn apply(b: &Branch, v: &AggregateQuery, vi: usize, m: Match, is_sum: bool) -> Option<Branch> {
    let mapping = m.mapping();
    let hidden: BTreeSet<&str> = m.phi.iter().filter_map(|(_, t)| t.as_var()).collect();
    let mut next = b.clone();
    for a in &v.atoms {
        let image = mapping.apply_atom(a);
        if image.vars().any(|x| hidden.contains(x)) {
            next.r.retain(|x| x != &image);
            if !next.not_covered.contains(&image) {
                return None;
            }
        }
        next.not_covered.retain(|x| x != &image);
    }
    next.c.retain(|c| !c.vars().any(|x| hidden.contains(x)));
    let exposed: Vec<Term> = v.grouping.iter().map(|g| m.theta.apply_var(g)).collect();
    next.visible.extend(term_vars(&exposed).map(str::to_string));
    next.sum_used |= is_sum;
    next.chosen.push((vi, m));
    Some(next)
}

/// Drops comparisons the rest of `c` and the views' own comparisons already
/// entail, scanning from the end so earlier comparisons are kept.
pub(super) fn minimize(c: &[Comparison], inherited: &[Comparison]) -> Vec<Comparison> {
    let mut kept: Vec<Comparison> = c.to_vec();
    let mut i = kept.len();
    while i > 0 {
        i -= 1;
        let rest: Vec<Comparison> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, x)| x.clone())
            .chain(inherited.iter().cloned())
            .collect();
        if implies_all(&rest, std::slice::from_ref(&kept[i])) {
            kept.remove(i);
        }
    }
    kept
}

fn search(
    q: &AggregateQuery,
    vs: &ViewSet,
    y: Option<&str>,
    opts: Options,
) -> Result<Vec<Rewriting>> {
    let c = if opts.close_first {
        let mut constants = q.rational_constants();
        for v in vs.iter() {
            constants.extend(v.rational_constants());
        }
        match deductive_closure_with(&ConstraintSet::from(q.comparisons.as_slice()), constants) {
            Ok(closed) => closed.to_vec(),
            // an unsatisfiable query has no meaningful rewriting
            Err(Error::InconsistentInput) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        }
    } else {
        q.comparisons.clone()
    };
    let r = dedup(&q.atoms);
    let mut not_covered = r.clone();
    not_covered.sort();
    let views = vs
        .iter()
        .filter(|v| match v.kind() {
            Some(AggKind::Count) => true,
            Some(AggKind::Sum) => y.is_some(),
            _ => false,
        })
        .collect();
    let mut engine = Engine {
        q,
        views,
        y,
        opts,
        found: Vec::new(),
        seen: BTreeSet::new(),
    };
    if not_covered.is_empty() {
        return Ok(Vec::new());
    }
    engine.step(Branch {
        r,
        not_covered,
        c,
        chosen: Vec::new(),
        visible: BTreeSet::new(),
        sum_used: false,
    });
    Ok(engine.found)
}

/// COUNT rewritings of `q` over the COUNT views of `vs`, in raw
/// `sum(Z1*...*Zn)` form.
pub fn count_rewriting(q: &AggregateQuery, vs: &ViewSet, opts: Options) -> Result<Vec<Rewriting>> {
    if q.kind() != Some(AggKind::Count) {
        return Err(Error::WrongQueryKind {
            expected: AggKind::Count,
            found: q.kind_name(),
            query: q.name.clone(),
        });
    }
    search(q, vs, None, opts)
}

/// SUM rewritings of `q` over the COUNT views and at most one SUM view of
/// `vs`, in raw `sum(Y*Z1*...*Zn)` form.
pub fn sum_rewriting(q: &AggregateQuery, vs: &ViewSet, opts: Options) -> Result<Vec<Rewriting>> {
    if q.kind() != Some(AggKind::Sum) {
        return Err(Error::WrongQueryKind {
            expected: AggKind::Sum,
            found: q.kind_name(),
            query: q.name.clone(),
        });
    }
    search(q, vs, q.agg_var(), opts)
}
