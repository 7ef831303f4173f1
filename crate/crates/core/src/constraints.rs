//! Conjunctions of `<` and `<=` over the rationals.
//!
//! Everything goes through one order graph: a node per variable and per
//! rational constant, an edge per comparison, and order edges between the
//! constants. The transitive closure labels each pair as unrelated, `<=` or
//! `<`. Because the rationals are dense and unbounded, a conjunction is
//! satisfiable exactly when no term ends up strictly below itself, and it
//! entails `s < t` (`s <= t`) exactly when the closure says so.

use std::collections::{BTreeMap, BTreeSet};

use num::BigRational;

use crate::error::{Error, Result};
use crate::model::{CmpOp, Comparison, Term};

/// A set of comparisons. `closed` is only set by [`deductive_closure`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ConstraintSet {
    comparisons: BTreeSet<Comparison>,
    closed: bool,
}

impl ConstraintSet {
    pub fn new<I: IntoIterator<Item = Comparison>>(comparisons: I) -> Self {
        ConstraintSet {
            comparisons: comparisons.into_iter().collect(),
            closed: false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Comparison> {
        self.comparisons.iter()
    }

    pub fn len(&self) -> usize {
        self.comparisons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparisons.is_empty()
    }

    pub fn contains(&self, c: &Comparison) -> bool {
        self.comparisons.contains(c)
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn to_vec(&self) -> Vec<Comparison> {
        self.comparisons.iter().cloned().collect()
    }

    /// Variables and rational constants mentioned.
    pub fn vocabulary(&self) -> BTreeSet<Term> {
        self.comparisons
            .iter()
            .flat_map(|c| [&c.lhs, &c.rhs])
            .filter(|t| !matches!(t, Term::Str(_)))
            .cloned()
            .collect()
    }
}

impl From<Vec<Comparison>> for ConstraintSet {
    fn from(v: Vec<Comparison>) -> Self {
        ConstraintSet::new(v)
    }
}

impl From<&[Comparison]> for ConstraintSet {
    fn from(v: &[Comparison]) -> Self {
        ConstraintSet::new(v.iter().cloned())
    }
}

impl FromIterator<Comparison> for ConstraintSet {
    fn from_iter<I: IntoIterator<Item = Comparison>>(iter: I) -> Self {
        ConstraintSet::new(iter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Rel {
    None,
    Le,
    Lt,
}

fn chain(a: Rel, b: Rel) -> Rel {
    match (a, b) {
        (Rel::None, _) | (_, Rel::None) => Rel::None,
        (Rel::Lt, _) | (_, Rel::Lt) => Rel::Lt,
        _ => Rel::Le,
    }
}

/// Transitively closed order graph over a fixed vocabulary.
#[derive(Clone, Debug)]
pub(crate) struct OrderGraph {
    terms: Vec<Term>,
    index: BTreeMap<Term, usize>,
    rel: Vec<Vec<Rel>>,
    consistent: bool,
}

impl OrderGraph {
    /// Builds the closure of `comparisons` over their vocabulary plus `extra`.
    pub(crate) fn build<'a>(
        comparisons: impl IntoIterator<Item = &'a Comparison>,
        extra: impl IntoIterator<Item = Term>,
    ) -> Self {
        let comparisons: Vec<&Comparison> = comparisons.into_iter().collect();
        let mut consistent = true;
        let mut terms = BTreeSet::new();
        for c in &comparisons {
            for t in [&c.lhs, &c.rhs] {
                match t {
                    Term::Str(_) => consistent = false,
                    t => {
                        terms.insert(t.clone());
                    }
                }
            }
        }
        terms.extend(extra.into_iter().filter(|t| !matches!(t, Term::Str(_))));
        let terms: Vec<Term> = terms.into_iter().collect();
        let index: BTreeMap<Term, usize> = terms
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();
        let n = terms.len();
        let mut rel = vec![vec![Rel::None; n]; n];
        for (i, row) in rel.iter_mut().enumerate() {
            row[i] = Rel::Le;
        }
        for (i, a) in terms.iter().enumerate() {
            for (j, b) in terms.iter().enumerate() {
                if let (Term::Num(x), Term::Num(y)) = (a, b) {
                    if x < y {
                        rel[i][j] = Rel::Lt;
                    }
                }
            }
        }
        for c in comparisons {
            let (Some(&i), Some(&j)) = (index.get(&c.lhs), index.get(&c.rhs)) else {
                continue;
            };
            let r = match c.op {
                CmpOp::Lt => Rel::Lt,
                CmpOp::Le => Rel::Le,
            };
            rel[i][j] = rel[i][j].max(r);
        }
        for k in 0..n {
            for i in 0..n {
                if rel[i][k] == Rel::None {
                    continue;
                }
                for j in 0..n {
                    let via = chain(rel[i][k], rel[k][j]);
                    if via > rel[i][j] {
                        rel[i][j] = via;
                    }
                }
            }
        }
        if (0..n).any(|i| rel[i][i] == Rel::Lt) {
            consistent = false;
        }
        OrderGraph {
            terms,
            index,
            rel,
            consistent,
        }
    }

    pub(crate) fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Whether the graph's constraints entail `c`.
    pub(crate) fn entails(&self, c: &Comparison) -> bool {
        if !self.consistent {
            return true;
        }
        if let Some(v) = c.ground_value() {
            return v;
        }
        if c.lhs == c.rhs {
            return c.op == CmpOp::Le;
        }
        let (Some(&i), Some(&j)) = (self.index.get(&c.lhs), self.index.get(&c.rhs)) else {
            // a term outside the vocabulary is unconstrained
            return false;
        };
        match c.op {
            CmpOp::Lt => self.rel[i][j] == Rel::Lt,
            CmpOp::Le => self.rel[i][j] != Rel::None,
        }
    }

    /// Strongest entailed comparison between every ordered pair with at
    /// least one variable.
    fn closure(&self) -> Vec<Comparison> {
        let mut out = Vec::new();
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate() {
                if i == j || (!a.is_var() && !b.is_var()) {
                    continue;
                }
                match self.rel[i][j] {
                    Rel::None => {}
                    Rel::Le => out.push(Comparison::le(a.clone(), b.clone())),
                    Rel::Lt => out.push(Comparison::lt(a.clone(), b.clone())),
                }
            }
        }
        out
    }
}

/// True iff some rational assignment satisfies every comparison.
pub fn consistent(c: &ConstraintSet) -> bool {
    OrderGraph::build(c.iter(), []).is_consistent()
}

/// True iff every rational model of `c` satisfies `c2`. An inconsistent
/// `c` implies everything.
pub fn implies(c: &ConstraintSet, c2: &ConstraintSet) -> bool {
    let graph = OrderGraph::build(c.iter(), c2.vocabulary());
    c2.iter().all(|x| graph.entails(x))
}

/// Slice form of [`implies`].
pub fn implies_all(c: &[Comparison], c2: &[Comparison]) -> bool {
    let graph = OrderGraph::build(c, c2.iter().flat_map(|x| [x.lhs.clone(), x.rhs.clone()]));
    c2.iter().all(|x| graph.entails(x))
}

/// Every comparison over the vocabulary of `c` that `c` entails, keeping
/// the strongest operator per ordered pair.
pub fn deductive_closure(c: &ConstraintSet) -> Result<ConstraintSet> {
    deductive_closure_with(c, [])
}

/// [`deductive_closure`] over the vocabulary of `c` plus `constants`.
pub fn deductive_closure_with(
    c: &ConstraintSet,
    constants: impl IntoIterator<Item = BigRational>,
) -> Result<ConstraintSet> {
    let graph = OrderGraph::build(c.iter(), constants.into_iter().map(Term::Num));
    if !graph.is_consistent() {
        return Err(Error::InconsistentInput);
    }
    Ok(ConstraintSet {
        comparisons: graph.closure().into_iter().collect(),
        closed: true,
    })
}

/// Mutual implication.
pub fn equivalent_constraints(c: &ConstraintSet, c2: &ConstraintSet) -> bool {
    implies(c, c2) && implies(c2, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_comparisons;

    fn cs(text: &str) -> ConstraintSet {
        ConstraintSet::new(parse_comparisons(text).unwrap())
    }

    #[test]
    fn consistency() {
        assert!(!consistent(&cs("X<Y, Y<X")));
        assert!(!consistent(&cs("X<Y, Y<=X")));
        assert!(consistent(&cs("X<=Y, Y<=X")));
        assert!(consistent(&cs("200<A, A<600")));
        assert!(!consistent(&cs("3<A, A<2")));
        assert!(!consistent(&cs("2<=A, A<=2, A<2")));
        assert!(consistent(&cs("")));
    }

    #[test]
    fn implication() {
        assert!(implies(&cs("200<A, A<600"), &cs("0<A")));
        assert!(!implies(&cs("0<A"), &cs("200<A, A<600")));
        let c = cs("X<Y, Y<=Z, 1<Z");
        assert!(implies(&c, &c));
        assert!(implies(&cs("X<Y, Y<X"), &cs("Q<0")));
        assert!(!implies(&cs("X<Y"), &cs("X<Q")));
        assert!(implies(&cs("X<=3, 3<=X"), &cs("X<5, 2<X")));
    }

    #[test]
    fn closure_examples() {
        let closed = deductive_closure(&cs("X<Y, Y<2, U<W, W<2")).unwrap();
        assert!(closed.contains(&Comparison::lt(Term::var("X"), Term::int(2))));
        assert!(closed.contains(&Comparison::lt(Term::var("U"), Term::int(2))));
        assert!(closed.is_closed());
        assert!(deductive_closure(&cs("")).unwrap().is_empty());
        let closed = deductive_closure(&cs("X<Y, Y<=Z")).unwrap();
        assert!(closed.contains(&Comparison::lt(Term::var("X"), Term::var("Z"))));
        assert_eq!(
            deductive_closure(&cs("X<Y, Y<X")),
            Err(Error::InconsistentInput)
        );
    }

    #[test]
    fn closure_with_injected_constants() {
        let closed =
            deductive_closure_with(&cs("A<1"), [BigRational::from_integer(2.into())]).unwrap();
        assert!(closed.contains(&Comparison::lt(Term::var("A"), Term::int(2))));
    }

    #[test]
    fn equivalence() {
        assert!(equivalent_constraints(&cs("X<Y"), &cs("X<Y, X<=Y")));
        assert!(!equivalent_constraints(&cs("X<2"), &cs("X<=2")));
        let c = cs("X<Y, Y<=3, 1<=X");
        assert!(equivalent_constraints(&c, &deductive_closure(&c).unwrap()));
    }
}
