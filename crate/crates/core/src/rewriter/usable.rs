use std::collections::BTreeSet;

use crate::constraints::implies_all;
use crate::matcher::{Match, Restrict, Search};
use crate::model::{AggregateQuery, Atom, Comparison, Substitution, Term};

use super::nondistinguished_vars;

/// Matches of `v` onto subsets of `body` under which the hidden variables
/// (images of nondistinguished view variables) occur nowhere outside the
/// covered atoms and not in `elsewhere`.
///
/// With `agg_target = Some(y)`, the view's aggregation variable must map to
/// `y`, and `y` may then be hidden even though it is in `elsewhere`.
pub(crate) fn usable_matches<'a>(
    v: &'a AggregateQuery,
    body: &'a [Atom],
    elsewhere: BTreeSet<String>,
    agg_target: Option<String>,
) -> impl Iterator<Item = Match> + 'a {
    let ndv = nondistinguished_vars(v);
    let restrict = Restrict {
        injective: ndv.clone(),
        distinct_targets: false,
    };
    Search::new(&v.atoms, body, &Substitution::new(), restrict).filter_map(move |m| {
        let image: Vec<Atom> = m.image.iter().map(|&i| body[i].clone()).collect();
        let mut theta = Substitution::new();
        let mut phi = Substitution::new();
        for (x, t) in m.mapping.iter() {
            if ndv.contains(x) {
                phi.insert(x.clone(), t.clone());
            } else {
                theta.insert(x.clone(), t.clone());
            }
        }
        let exempt = match (v.agg_var(), agg_target.as_deref()) {
            (Some(a), Some(y)) => {
                if phi.get(a) != Some(&Term::var(y)) {
                    return None;
                }
                Some(y)
            }
            (None, Some(_)) => return None,
            _ => None,
        };
        let outside: BTreeSet<&str> = body
            .iter()
            .enumerate()
            .filter(|(i, _)| !m.image.contains(i))
            .flat_map(|(_, a)| a.vars())
            .collect();
        for (_, w) in phi.iter() {
            let w = w.as_var().expect("hidden images are variables");
            if outside.contains(w) || (elsewhere.contains(w) && Some(w) != exempt) {
                return None;
            }
        }
        Some(Match {
            view: v.name.clone(),
            theta,
            phi,
            image,
        })
    })
}

/// Every `(θ, φ, R′)` under which `v` is R-usable for `q`. The grouping and
/// aggregation variables of `q` count as occurring elsewhere, except that an
/// aggregate view of the same kind may hide `q`'s aggregation variable
/// behind its own.
pub fn r_usable_matches<'a>(
    v: &'a AggregateQuery,
    q: &'a AggregateQuery,
) -> impl Iterator<Item = Match> + 'a {
    let elsewhere = q
        .grouping
        .iter()
        .cloned()
        .chain(q.agg_var().map(str::to_string))
        .collect();
    let target = match (v.kind(), q.kind()) {
        (Some(a), Some(b)) if a == b && v.agg_var().is_some() => q.agg_var().map(str::to_string),
        _ => None,
    };
    usable_matches(v, &q.atoms, elsewhere, target)
}

/// The two C-usability implications, reported separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CUsability {
    /// `C ⊨ φθC_v`: the view's comparisons are weaker than the query's.
    pub weaker: bool,
    /// `φθC_v ⊨ C^{φθ ndv(v)}`: the view's comparisons imply every query
    /// comparison on a hidden variable.
    pub covers_hidden: bool,
}

impl CUsability {
    pub fn holds(self) -> bool {
        self.weaker && self.covers_hidden
    }
}

/// Checks both C-usability conditions of `v` under `m` against `c`.
pub fn c_usability(v: &AggregateQuery, m: &Match, c: &[Comparison]) -> CUsability {
    let mapping = m.mapping();
    let mapped: Vec<Comparison> = v
        .comparisons
        .iter()
        .map(|x| mapping.apply_comparison(x))
        .collect();
    let hidden: BTreeSet<&str> = m.phi.iter().filter_map(|(_, t)| t.as_var()).collect();
    let on_hidden: Vec<Comparison> = c
        .iter()
        .filter(|x| x.vars().any(|w| hidden.contains(w)))
        .cloned()
        .collect();
    CUsability {
        weaker: implies_all(c, &mapped),
        covers_hidden: implies_all(&mapped, &on_hidden),
    }
}

/// C-usability against `q`'s comparisons, which should be deductively
/// closed.
pub fn c_usable(v: &AggregateQuery, m: &Match, q: &AggregateQuery) -> bool {
    c_usability(v, m, &q.comparisons).holds()
}
