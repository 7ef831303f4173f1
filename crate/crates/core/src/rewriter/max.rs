//! MAX and MIN rewriting with a usability-filtered bucket search.

use std::collections::BTreeSet;

use crate::constraints::{consistent, deductive_closure_with, ConstraintSet};
use crate::error::{Error, Result};
use crate::matcher::{find_homomorphisms, Match};
use crate::model::{
    dedup, AggKind, AggregateQuery, Atom, Comparison, Extremum, HeadExpr, Rewriting, Substitution,
    Term, ViewAtom, ViewSet,
};

use super::engine::minimize;
use super::verify::verify_rewriting_with;
use super::{nondistinguished_vars, Fresh, Options, Verdict};

/// A bucket entry: a view with a homomorphism of its whole body into the
/// query body, or (for partial rewritings) the bucket's own atom.
#[derive(Clone, Debug)]
enum Entry {
    View {
        index: usize,
        h: Substitution,
        image: Vec<Atom>,
    },
    Base(Atom),
}

/// Builds the bucket of `atom`. With `filter` set, views that hide a
/// variable still needed by an atom they leave uncovered are left out.
fn bucket(
    q: &AggregateQuery,
    body: &[Atom],
    atom: &Atom,
    views: &[&AggregateQuery],
    filter: bool,
    partial: bool,
) -> Vec<Entry> {
    let mut out = Vec::new();
    let cq = ConstraintSet::from(q.comparisons.as_slice());
    for (index, v) in views.iter().enumerate() {
        let ndv = nondistinguished_vars(v);
        for h in find_homomorphisms(&v.atoms, body, &Substitution::new()) {
            let image: Vec<Atom> =
                dedup(&v.atoms.iter().map(|a| h.apply_atom(a)).collect::<Vec<_>>());
            if !image.contains(atom) {
                continue;
            }
            if let Some(a) = v.agg_var() {
                if h.apply_var(a).as_var() != q.agg_var() {
                    continue;
                }
            }
            let mapped = cq
                .iter()
                .cloned()
                .chain(v.comparisons.iter().map(|c| h.apply_comparison(c)));
            if !consistent(&mapped.collect()) {
                continue;
            }
            if filter {
                let leaks = ndv.iter().any(|w| {
                    let Term::Var(z) = h.apply_var(w) else {
                        return false;
                    };
                    body.iter().any(|b| !image.contains(b) && b.mentions(&z))
                });
                if leaks {
                    continue;
                }
            }
            out.push(Entry::View { index, h, image });
        }
    }
    if partial {
        out.push(Entry::Base(atom.clone()));
    }
    out
}

struct Assembler<'a> {
    q: &'a AggregateQuery,
    vs: &'a ViewSet,
    views: Vec<&'a AggregateQuery>,
    extremum: Extremum,
    closed: Vec<Comparison>,
    opts: Options,
    trials: usize,
    found: Vec<Rewriting>,
    seen: BTreeSet<String>,
}

impl Assembler<'_> {
    fn done(&self) -> bool {
        !self.opts.all && !self.found.is_empty()
    }

    fn walk(&mut self, buckets: &[Vec<Entry>], picked: &mut Vec<Entry>) -> Result<()> {
        if self.done() {
            return Ok(());
        }
        let Some((first, rest)) = buckets.split_first() else {
            return self.try_candidate(picked);
        };
        for e in first {
            picked.push(e.clone());
            self.walk(rest, picked)?;
            picked.pop();
            if self.done() {
                break;
            }
        }
        Ok(())
    }

    /// Turns one pick per bucket into a rewriting, verifies it, and keeps it
    /// unless it is refuted.
    fn try_candidate(&mut self, picked: &[Entry]) -> Result<()> {
        let mut fresh = Fresh::new(self.q.atom_vars().into_iter().map(str::to_string));
        let mut view_atoms: Vec<ViewAtom> = Vec::new();
        let mut keys: BTreeSet<(String, Vec<Term>)> = BTreeSet::new();
        let mut base_atoms: Vec<Atom> = Vec::new();
        let mut provenance = Vec::new();
        let mut inherited = Vec::new();
        let mut output = None;
        let mut entries: Vec<&Entry> = picked.iter().collect();
        entries.sort_by_key(|e| match e {
            Entry::View { index, .. } => (0, *index),
            Entry::Base(_) => (1, 0),
        });
        for e in entries {
            match e {
                Entry::Base(a) => {
                    if !base_atoms.contains(a) {
                        base_atoms.push(a.clone());
                    }
                }
                Entry::View { index, h, image } => {
                    let v = self.views[*index];
                    let args: Vec<Term> = v.grouping.iter().map(|g| h.apply_var(g)).collect();
                    if !keys.insert((v.name.clone(), args.clone())) {
                        continue;
                    }
                    let out = if v.agg.is_some() {
                        if output.is_some() {
                            return Ok(());
                        }
                        let z = fresh.next();
                        output = Some(z.clone());
                        Some(z)
                    } else {
                        None
                    };
                    inherited.extend(v.comparisons.iter().map(|c| h.apply_comparison(c)));
                    let (theta, phi) = split(v, h);
                    provenance.push(Match {
                        view: v.name.clone(),
                        theta,
                        phi,
                        image: image.clone(),
                    });
                    view_atoms.push(ViewAtom {
                        view: v.name.clone(),
                        args,
                        output: out,
                    });
                }
            }
        }
        if view_atoms.is_empty() {
            return Ok(());
        }
        let mut accessible: BTreeSet<String> = view_atoms
            .iter()
            .flat_map(|a| a.arg_vars().map(str::to_string).collect::<Vec<_>>())
            .collect();
        accessible.extend(
            base_atoms
                .iter()
                .flat_map(|a| a.vars().map(str::to_string).collect::<Vec<_>>()),
        );
        if !self.q.grouping.iter().all(|g| accessible.contains(g)) {
            return Ok(());
        }
        let y = match output {
            Some(z) => z,
            None => {
                let y = self.q.agg_var().expect("MAX query").to_string();
                if !accessible.contains(&y) {
                    return Ok(());
                }
                y
            }
        };
        let local: Vec<Comparison> = self
            .closed
            .iter()
            .filter(|c| c.vars().all(|v| accessible.contains(v)))
            .cloned()
            .collect();
        let inherited: Vec<Comparison> = inherited
            .into_iter()
            .filter(|c| c.vars().all(|v| accessible.contains(v)))
            .collect();
        let r = Rewriting {
            name: format!("r_{}", self.q.name),
            grouping: self.q.grouping.clone(),
            head: HeadExpr::Extremum(self.extremum, y),
            view_atoms,
            base_atoms,
            comparisons: minimize(&local, &inherited),
            provenance,
        };
        let key = format!("{:?}", r.canonical());
        if !self.seen.insert(key) {
            return Ok(());
        }
        match verify_rewriting_with(self.q, &r, self.vs, self.trials, 0)? {
            Verdict::ProvedEquivalent(_) | Verdict::Unknown(_) => self.found.push(r),
            _ => {}
        }
        Ok(())
    }
}

fn split(v: &AggregateQuery, h: &Substitution) -> (Substitution, Substitution) {
    let ndv = nondistinguished_vars(v);
    let mut theta = Substitution::new();
    let mut phi = Substitution::new();
    for (x, t) in h.iter() {
        if ndv.contains(x) {
            phi.insert(x.clone(), t.clone());
        } else {
            theta.insert(x.clone(), t.clone());
        }
    }
    (theta, phi)
}

pub(crate) fn max_search(
    q: &AggregateQuery,
    vs: &ViewSet,
    opts: Options,
    filter: bool,
) -> Result<Vec<Rewriting>> {
    let extremum = match q.agg.as_ref().and_then(|a| a.extremum()) {
        Some(e) => e,
        None => {
            return Err(Error::WrongQueryKind {
                expected: AggKind::Max,
                found: q.kind_name(),
                query: q.name.clone(),
            })
        }
    };
    let views: Vec<&AggregateQuery> = vs
        .iter()
        .filter(|v| v.kind().is_none() || v.kind() == Some(extremum.kind()))
        .collect();
    let mut constants = q.rational_constants();
    for v in &views {
        constants.extend(v.rational_constants());
    }
    let closed =
        match deductive_closure_with(&ConstraintSet::from(q.comparisons.as_slice()), constants) {
            Ok(c) if opts.close_first => c.to_vec(),
            Ok(_) => q.comparisons.clone(),
            Err(Error::InconsistentInput) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
    let body = dedup(&q.atoms);
    let buckets: Vec<Vec<Entry>> = body
        .iter()
        .map(|a| bucket(q, &body, a, &views, filter, opts.partial))
        .collect();
    if body.is_empty() || buckets.iter().any(Vec::is_empty) {
        return Ok(Vec::new());
    }
    let mut asm = Assembler {
        q,
        vs,
        views,
        extremum,
        closed,
        opts,
        trials: 200,
        found: Vec::new(),
        seen: BTreeSet::new(),
    };
    asm.walk(&buckets, &mut Vec::new())?;
    Ok(asm.found)
}

/// MAX (or MIN) rewritings over non-aggregate views and at most one view of
/// the query's own aggregate. Candidates are assembled from per-atom buckets
/// and only kept when verification does not refute them.
pub fn max_rewriting(q: &AggregateQuery, vs: &ViewSet, opts: Options) -> Result<Vec<Rewriting>> {
    max_search(q, vs, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_query, parse_views};

    fn run(q: &str, views: &str) -> Vec<String> {
        let q = parse_query(q).unwrap();
        let vs = parse_views(views).unwrap();
        max_rewriting(&q, &vs, Options::default())
            .unwrap()
            .iter()
            .map(|r| r.to_string())
            .collect()
    }

    #[test]
    fn identity_cover() {
        assert_eq!(
            run("q(X; max(Y)) :- p(X, Y).", "v(X, Y) :- p(X, Y)."),
            vec!["r_q(X; max(Y)) :- v(X, Y)."]
        );
    }

    #[test]
    fn max_view() {
        assert_eq!(
            run("q(X; max(Y)) :- p(X, Y).", "vm(X; max(Y)) :- p(X, Y)."),
            vec!["r_q(X; max(Z1)) :- vm(X; Z1)."]
        );
    }

    #[test]
    fn hidden_scalar_is_filtered() {
        assert!(run(
            "q(X; max(Y)) :- p(X, Y), r0(Y, Z).",
            "vm(X; max(Y)) :- p(X, Y)."
        )
        .is_empty());
        let q = parse_query("q(X; max(Y)) :- p(X, Y), r0(Y, Z).").unwrap();
        let vs = parse_views("vm(X; max(Y)) :- p(X, Y).").unwrap();
        let p = bucket(
            &q,
            &q.atoms,
            &q.atoms[0],
            &vs.iter().collect::<Vec<_>>(),
            true,
            false,
        );
        assert!(p.is_empty());
    }

    #[test]
    fn min_mirrors_max() {
        assert_eq!(
            run(
                "q(X; min(Y)) :- p(X, Y), Y < 3.",
                "v(X, Y) :- p(X, Y).\nvm(X; max(Y)) :- p(X, Y)."
            ),
            vec!["r_q(X; min(Y)) :- v(X, Y), Y < 3."]
        );
    }

    #[test]
    fn join_of_two_views() {
        let out = run(
            "q(X; max(Y)) :- p(X, W), s(W, Y).",
            "v1(X, W) :- p(X, W).\nv2(W, Y) :- s(W, Y).",
        );
        assert_eq!(out, vec!["r_q(X; max(Y)) :- v1(X, W), v2(W, Y)."]);
    }

    /// The filter judges each view on its own, so it can drop a candidate
    /// that verifies when another view of the same candidate covers the
    /// leaked atom. Such a candidate is never the only one: a kept
    /// rewriting uses a subset of its views.
    #[test]
    fn filter_keeps_a_rewriting_whenever_one_exists() {
        use crate::gen::{random_instance, GenConfig};
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let opts = Options {
            all: true,
            ..Options::default()
        };
        let names = |r: &Rewriting| -> BTreeSet<String> {
            r.view_atoms.iter().map(|a| a.view.clone()).collect()
        };
        let key = |r: &Rewriting| format!("{:?}", r.canonical());
        for i in 0..300 {
            let kind = if i % 2 == 0 {
                AggKind::Max
            } else {
                AggKind::Min
            };
            let (q, vs) = random_instance(&mut rng, &GenConfig::default(), kind);
            let kept = max_search(&q, &vs, opts, true).unwrap();
            let all = max_search(&q, &vs, opts, false).unwrap();
            let all_keys: BTreeSet<String> = all.iter().map(key).collect();
            assert!(kept.iter().all(|r| all_keys.contains(&key(r))), "{q}");
            for r in &all {
                assert!(
                    kept.iter().any(|k| names(k).is_subset(&names(r))),
                    "{r} was filtered with nothing kept in its place for {q}"
                );
            }
        }
    }
}
