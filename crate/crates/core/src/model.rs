//! Terms, atoms, comparisons, aggregate queries, view sets and rewritings.
//!
//! Every value here is immutable once built. Queries are kept in the
//! variable names the user wrote; [`AggregateQuery::normalize`] produces the
//! canonical, rename-insensitive form used for golden comparisons.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use num::{BigInt, BigRational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::Match;

/// A variable, an exact rational constant or an opaque string constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Num(BigRational),
    Str(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn int(value: i64) -> Self {
        Term::Num(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Term::Num(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn string(value: impl Into<String>) -> Self {
        Term::Str(value.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Term::Num(n) => Some(n),
            _ => None,
        }
    }
}

/// Renders a rational as `n` or `n/d`.
pub fn format_rational(value: &BigRational) -> String {
    if value.denom() == &BigInt::from(1) {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
        }
    }

    pub fn holds(self, lhs: &BigRational, rhs: &BigRational) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
        }
    }
}

/// `lhs < rhs` or `lhs <= rhs`. Surface `>`/`>=` are flipped by the parser.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Comparison {
    pub lhs: Term,
    pub op: CmpOp,
    pub rhs: Term,
}

impl Comparison {
    pub fn new(lhs: Term, op: CmpOp, rhs: Term) -> Self {
        Comparison { lhs, op, rhs }
    }

    pub fn lt(lhs: Term, rhs: Term) -> Self {
        Comparison::new(lhs, CmpOp::Lt, rhs)
    }

    pub fn le(lhs: Term, rhs: Term) -> Self {
        Comparison::new(lhs, CmpOp::Le, rhs)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.lhs, &self.rhs].into_iter().filter_map(Term::as_var)
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.vars().any(|v| v == var)
    }

    pub fn is_ground(&self) -> bool {
        !self.lhs.is_var() && !self.rhs.is_var()
    }

    /// Truth value of a ground comparison. Comparisons involving a string
    /// constant never hold.
    pub fn ground_value(&self) -> Option<bool> {
        match (&self.lhs, &self.rhs) {
            (Term::Num(a), Term::Num(b)) => Some(self.op.holds(a, b)),
            (Term::Var(_), _) | (_, Term::Var(_)) => None,
            _ => Some(false),
        }
    }
}

/// `p(s1, ..., sk)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.vars().any(|v| v == var)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggKind {
    Count,
    Sum,
    Max,
    Min,
}

impl fmt::Display for AggKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggKind::Count => "COUNT",
            AggKind::Sum => "SUM",
            AggKind::Max => "MAX",
            AggKind::Min => "MIN",
        })
    }
}

/// Direction of an order-based aggregate. MIN is the order dual of MAX.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

impl Extremum {
    pub fn kind(self) -> AggKind {
        match self {
            Extremum::Max => AggKind::Max,
            Extremum::Min => AggKind::Min,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Extremum::Max => "max",
            Extremum::Min => "min",
        }
    }

    /// Picks the preferred of two values.
    pub fn pick<'a>(self, a: &'a BigRational, b: &'a BigRational) -> &'a BigRational {
        match self {
            Extremum::Max => a.max(b),
            Extremum::Min => a.min(b),
        }
    }
}

/// Elementary aggregate term: `count`, `sum(Y)`, `max(Y)` or `min(Y)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggregateTerm {
    Count,
    Sum(String),
    Max(String),
    Min(String),
}

impl AggregateTerm {
    pub fn kind(&self) -> AggKind {
        match self {
            AggregateTerm::Count => AggKind::Count,
            AggregateTerm::Sum(_) => AggKind::Sum,
            AggregateTerm::Max(_) => AggKind::Max,
            AggregateTerm::Min(_) => AggKind::Min,
        }
    }

    pub fn var(&self) -> Option<&str> {
        match self {
            AggregateTerm::Count => None,
            AggregateTerm::Sum(v) | AggregateTerm::Max(v) | AggregateTerm::Min(v) => Some(v),
        }
    }

    pub fn extremum(&self) -> Option<Extremum> {
        match self {
            AggregateTerm::Max(_) => Some(Extremum::Max),
            AggregateTerm::Min(_) => Some(Extremum::Min),
            _ => None,
        }
    }

    pub fn with_var(&self, var: String) -> Self {
        match self {
            AggregateTerm::Count => AggregateTerm::Count,
            AggregateTerm::Sum(_) => AggregateTerm::Sum(var),
            AggregateTerm::Max(_) => AggregateTerm::Max(var),
            AggregateTerm::Min(_) => AggregateTerm::Min(var),
        }
    }
}

/// `name(x̄; α(y)) :- R, C`. Without an aggregate term this is a plain
/// conjunctive query.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AggregateQuery {
    pub name: String,
    pub grouping: Vec<String>,
    pub agg: Option<AggregateTerm>,
    pub atoms: Vec<Atom>,
    pub comparisons: Vec<Comparison>,
}

impl AggregateQuery {
    /// Builds a query and checks safety.
    pub fn new(
        name: impl Into<String>,
        grouping: Vec<String>,
        agg: Option<AggregateTerm>,
        atoms: Vec<Atom>,
        comparisons: Vec<Comparison>,
    ) -> Result<Self> {
        let q = AggregateQuery {
            name: name.into(),
            grouping,
            agg,
            atoms,
            comparisons,
        };
        q.check_safety()?;
        Ok(q)
    }

    /// Every head, aggregation and comparison variable must occur in a
    /// relational atom.
    pub fn check_safety(&self) -> Result<()> {
        let body = self.atom_vars();
        let head = self.grouping.iter().map(String::as_str);
        let agg = self.agg_var().into_iter();
        let cmp = self.comparisons.iter().flat_map(Comparison::vars);
        for v in head.chain(agg).chain(cmp) {
            if !body.contains(v) {
                return Err(Error::UnsafeQuery {
                    query: self.name.clone(),
                    var: v.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> Option<AggKind> {
        self.agg.as_ref().map(AggregateTerm::kind)
    }

    pub fn kind_name(&self) -> String {
        match self.kind() {
            Some(k) => format!("a {k} query"),
            None => "a non-aggregate query".to_string(),
        }
    }

    pub fn agg_var(&self) -> Option<&str> {
        self.agg.as_ref().and_then(AggregateTerm::var)
    }

    /// Variables occurring in relational atoms.
    pub fn atom_vars(&self) -> BTreeSet<&str> {
        self.atoms.iter().flat_map(Atom::vars).collect()
    }

    pub fn is_relational(&self) -> bool {
        self.comparisons.is_empty()
    }

    pub fn is_linear(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.atoms.iter().all(|a| seen.insert(a.predicate.as_str()))
    }

    /// The core: the non-aggregate query returning grouping values followed
    /// by the aggregation variable.
    pub fn core(&self) -> AggregateQuery {
        let mut grouping = self.grouping.clone();
        if let Some(y) = self.agg_var() {
            grouping.push(y.to_string());
        }
        AggregateQuery {
            name: format!("{}_core", self.name),
            grouping,
            agg: None,
            atoms: self.atoms.clone(),
            comparisons: self.comparisons.clone(),
        }
    }

    /// Same body and grouping with the aggregate replaced.
    pub fn with_agg(&self, agg: Option<AggregateTerm>) -> AggregateQuery {
        AggregateQuery {
            agg,
            ..self.clone()
        }
    }

    /// Rational constants mentioned anywhere in the query.
    pub fn rational_constants(&self) -> BTreeSet<BigRational> {
        let atom_terms = self.atoms.iter().flat_map(|a| a.args.iter());
        let cmp_terms = self.comparisons.iter().flat_map(|c| [&c.lhs, &c.rhs]);
        atom_terms
            .chain(cmp_terms)
            .filter_map(Term::as_num)
            .cloned()
            .collect()
    }

    /// Canonical form: duplicates removed, true ground comparisons dropped,
    /// variables renamed `V0, V1, ...` along a deterministic traversal (head
    /// left to right, then body atoms picked greedily by their shape),
    /// comparisons sorted.
    pub fn normalize(&self) -> Result<AggregateQuery> {
        self.check_safety()?;
        let atoms = dedup(&self.atoms);
        let mut renamer = Renamer::new("V");
        for g in &self.grouping {
            renamer.name(g);
        }
        if let Some(y) = self.agg_var() {
            renamer.name(y);
        }
        let order = canonical_order(&atoms, &mut renamer);
        let subst = renamer.substitution();
        let atoms: Vec<Atom> = order.iter().map(|&i| subst.apply_atom(&atoms[i])).collect();
        let comparisons = normalize_comparisons(&self.comparisons, &subst);
        Ok(AggregateQuery {
            name: self.name.clone(),
            grouping: self.grouping.iter().map(|g| renamer.lookup(g)).collect(),
            agg: self.agg.as_ref().map(|a| match a.var() {
                Some(y) => a.with_var(renamer.lookup(y)),
                None => a.clone(),
            }),
            atoms,
            comparisons,
        })
    }
}

/// Drops true ground comparisons, applies `subst`, sorts and dedups.
pub(crate) fn normalize_comparisons(comps: &[Comparison], subst: &Substitution) -> Vec<Comparison> {
    let set: BTreeSet<Comparison> = comps
        .iter()
        .map(|c| subst.apply_comparison(c))
        .filter(|c| c.ground_value() != Some(true))
        .collect();
    set.into_iter().collect()
}

pub(crate) fn dedup<T: Clone + Ord>(items: &[T]) -> Vec<T> {
    let mut seen = BTreeSet::new();
    items.iter().filter(|a| seen.insert(*a)).cloned().collect()
}

/// Assigns canonical names in first-seen order.
#[derive(Debug, Clone)]
pub(crate) struct Renamer {
    prefix: &'static str,
    index: BTreeMap<String, usize>,
}

impl Renamer {
    pub(crate) fn new(prefix: &'static str) -> Self {
        Renamer {
            prefix,
            index: BTreeMap::new(),
        }
    }

    pub(crate) fn name(&mut self, var: &str) -> usize {
        let next = self.index.len();
        *self.index.entry(var.to_string()).or_insert(next)
    }

    pub(crate) fn get(&self, var: &str) -> Option<usize> {
        self.index.get(var).copied()
    }

    pub(crate) fn lookup(&self, var: &str) -> String {
        match self.get(var) {
            Some(i) => format!("{}{}", self.prefix, i),
            None => var.to_string(),
        }
    }

    pub(crate) fn substitution(&self) -> Substitution {
        self.index
            .iter()
            .map(|(v, i)| (v.clone(), Term::Var(format!("{}{}", self.prefix, i))))
            .collect()
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum KeyTerm<'a> {
    Bound(usize),
    Const(&'a Term),
    Fresh(usize),
}

fn shape_key<'a>(atom: &'a Atom, renamer: &Renamer) -> (&'a str, Vec<KeyTerm<'a>>) {
    let mut fresh: Vec<&str> = Vec::new();
    let key = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => match renamer.get(v) {
                Some(i) => KeyTerm::Bound(i),
                None => {
                    let pos = fresh.iter().position(|f| f == v).unwrap_or_else(|| {
                        fresh.push(v);
                        fresh.len() - 1
                    });
                    KeyTerm::Fresh(pos)
                }
            },
            c => KeyTerm::Const(c),
        })
        .collect();
    (atom.predicate.as_str(), key)
}

/// Greedy canonical atom order: repeatedly take the atom with the smallest
/// shape key (already named variables by index, constants by value, unnamed
/// variables by first position), ties broken by input position. Names the
/// variables of each picked atom as it goes.
pub(crate) fn canonical_order(atoms: &[Atom], renamer: &mut Renamer) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..atoms.len()).collect();
    let mut order = Vec::with_capacity(atoms.len());
    while !remaining.is_empty() {
        let (slot, _) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                shape_key(&atoms[a], renamer).cmp(&shape_key(&atoms[b], renamer))
            })
            .expect("nonempty");
        let picked = remaining.remove(slot);
        for v in atoms[picked].vars() {
            renamer.name(v);
        }
        order.push(picked);
    }
    order
}

/// A partial map from variables to terms, applied simultaneously.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, term: Term) -> Option<Term> {
        self.0.insert(var.into(), term)
    }

    pub fn remove(&mut self, var: &str) -> Option<Term> {
        self.0.remove(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    pub fn apply_term(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => self.0.get(v).cloned().unwrap_or_else(|| term.clone()),
            _ => term.clone(),
        }
    }

    pub fn apply_var(&self, var: &str) -> Term {
        self.0
            .get(var)
            .cloned()
            .unwrap_or_else(|| Term::Var(var.to_string()))
    }

    pub fn apply_atom(&self, atom: &Atom) -> Atom {
        Atom {
            predicate: atom.predicate.clone(),
            args: atom.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    pub fn apply_comparison(&self, c: &Comparison) -> Comparison {
        Comparison {
            lhs: self.apply_term(&c.lhs),
            op: c.op,
            rhs: self.apply_term(&c.rhs),
        }
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &Substitution) -> Substitution {
        let mut out: BTreeMap<String, Term> = self
            .0
            .iter()
            .map(|(v, t)| (v.clone(), other.apply_term(t)))
            .collect();
        for (v, t) in &other.0 {
            out.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Substitution(out)
    }

    /// Resolves chains so no variable of the image lies in the domain.
    /// Bindings of a variable to itself are dropped.
    pub fn normalized(&self) -> Substitution {
        let mut cur = self.clone();
        for _ in 0..=self.0.len() {
            let next = Substitution(
                cur.0
                    .iter()
                    .map(|(v, t)| (v.clone(), cur.apply_term(t)))
                    .collect(),
            );
            if next == cur {
                break;
            }
            cur = next;
        }
        cur.0.retain(|v, t| t.as_var() != Some(v));
        cur
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}/{t}")?;
        }
        f.write_str("}")
    }
}

/// Applies `s` to every atom and comparison.
pub fn apply_substitution(
    s: &Substitution,
    atoms: &[Atom],
    comps: &[Comparison],
) -> (Vec<Atom>, Vec<Comparison>) {
    (
        atoms.iter().map(|a| s.apply_atom(a)).collect(),
        comps.iter().map(|c| s.apply_comparison(c)).collect(),
    )
}

/// View definitions in declaration order, plus the base schema they are
/// written against.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ViewSet {
    views: IndexMap<String, AggregateQuery>,
    base_schema: BTreeMap<String, usize>,
    attributes: BTreeMap<String, Vec<String>>,
}

impl ViewSet {
    pub fn new(views: Vec<AggregateQuery>) -> Result<Self> {
        let mut set = ViewSet::default();
        for v in views {
            set.add(v)?;
        }
        Ok(set)
    }

    pub fn add(&mut self, view: AggregateQuery) -> Result<()> {
        view.check_safety()?;
        if self.views.contains_key(&view.name) {
            return Err(Error::InvalidViews(format!(
                "view `{}` is defined twice",
                view.name
            )));
        }
        if self.base_schema.contains_key(&view.name) {
            return Err(Error::InvalidViews(format!(
                "`{}` is used both as a view and as a base relation",
                view.name
            )));
        }
        for atom in &view.atoms {
            if self.views.contains_key(&atom.predicate) || atom.predicate == view.name {
                return Err(Error::InvalidViews(format!(
                    "view `{}` refers to view `{}`",
                    view.name, atom.predicate
                )));
            }
            match self.base_schema.get(&atom.predicate) {
                Some(&n) if n != atom.arity() => {
                    return Err(Error::ArityMismatch {
                        predicate: atom.predicate.clone(),
                        expected: n,
                        found: atom.arity(),
                    })
                }
                Some(_) => {}
                None => {
                    self.base_schema
                        .insert(atom.predicate.clone(), atom.arity());
                }
            }
        }
        self.views.insert(view.name.clone(), view);
        Ok(())
    }

    /// Declares a base relation that may not occur in any view body.
    pub fn declare_base(&mut self, predicate: &str, arity: usize) -> Result<()> {
        if self.views.contains_key(predicate) {
            return Err(Error::InvalidViews(format!(
                "`{predicate}` is used both as a view and as a base relation"
            )));
        }
        match self.base_schema.insert(predicate.to_string(), arity) {
            Some(n) if n != arity => Err(Error::ArityMismatch {
                predicate: predicate.to_string(),
                expected: n,
                found: arity,
            }),
            _ => Ok(()),
        }
    }

    pub fn set_attributes(&mut self, predicate: &str, names: Vec<String>) {
        self.attributes.insert(predicate.to_string(), names);
    }

    pub fn attributes(&self, predicate: &str) -> Option<&[String]> {
        self.attributes.get(predicate).map(Vec::as_slice)
    }

    pub fn get(&self, name: &str) -> Option<&AggregateQuery> {
        self.views.get(name)
    }

    pub fn is_view(&self, predicate: &str) -> bool {
        self.views.contains_key(predicate)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AggregateQuery> {
        self.views.values()
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn base_schema(&self) -> &BTreeMap<String, usize> {
        &self.base_schema
    }

    /// Column count of a view's materialized relation.
    pub fn relation_arity(&self, name: &str) -> Option<usize> {
        self.get(name)
            .map(|v| v.grouping.len() + usize::from(v.agg.is_some()))
    }
}

/// `v(θx̄; z)`: an instantiated view atom inside a rewriting. `output` names
/// the aggregate value column of an aggregate view.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewAtom {
    pub view: String,
    pub args: Vec<Term>,
    pub output: Option<String>,
}

impl ViewAtom {
    /// The atom as it is matched against the extended database.
    pub fn as_atom(&self) -> Atom {
        let mut args = self.args.clone();
        if let Some(z) = &self.output {
            args.push(Term::Var(z.clone()));
        }
        Atom::new(self.view.clone(), args)
    }

    pub fn arg_vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

/// Head expression of a rewriting.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HeadExpr {
    /// `sum(f1*...*fn)`; with no factors this is `count`.
    Sum(Vec<String>),
    /// `max(y)` / `min(y)`.
    Extremum(Extremum, String),
    /// `f1*...*fn` without aggregation. `omitted` records the aggregate the
    /// product abbreviates when it is known.
    Product {
        factors: Vec<String>,
        omitted: Option<AggKind>,
    },
    /// `root(k, f1*...*fn)`: the k-th root of a product. Never a candidate
    /// form; exists so such heads can be represented and rejected.
    Root { degree: u32, factors: Vec<String> },
}

impl HeadExpr {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            HeadExpr::Sum(f)
            | HeadExpr::Product { factors: f, .. }
            | HeadExpr::Root { factors: f, .. } => f.iter().map(String::as_str).collect(),
            HeadExpr::Extremum(_, y) => vec![y.as_str()],
        }
    }

    fn renamed(&self, r: &Renamer) -> HeadExpr {
        let sorted = |f: &[String]| {
            let mut out: Vec<String> = f.iter().map(|v| r.lookup(v)).collect();
            out.sort_by_key(|v| (v.len(), v.clone()));
            out
        };
        match self {
            HeadExpr::Sum(f) => HeadExpr::Sum(sorted(f)),
            HeadExpr::Extremum(e, y) => HeadExpr::Extremum(*e, r.lookup(y)),
            HeadExpr::Product { factors, omitted } => HeadExpr::Product {
                factors: sorted(factors),
                omitted: *omitted,
            },
            HeadExpr::Root { degree, factors } => HeadExpr::Root {
                degree: *degree,
                factors: sorted(factors),
            },
        }
    }
}

/// A query over view predicates (and, for partial rewritings, base
/// predicates).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rewriting {
    pub name: String,
    pub grouping: Vec<String>,
    pub head: HeadExpr,
    pub view_atoms: Vec<ViewAtom>,
    pub base_atoms: Vec<Atom>,
    pub comparisons: Vec<Comparison>,
    /// Matches used to build the rewriting, in the order they were chosen.
    pub provenance: Vec<Match>,
}

impl Rewriting {
    pub fn is_partial(&self) -> bool {
        !self.base_atoms.is_empty()
    }

    /// All body atoms as they are evaluated against the extended database.
    pub fn body_atoms(&self) -> Vec<Atom> {
        self.view_atoms
            .iter()
            .map(ViewAtom::as_atom)
            .chain(self.base_atoms.iter().cloned())
            .collect()
    }

    /// Variables of the body, including view outputs.
    pub fn body_vars(&self) -> BTreeSet<String> {
        self.body_atoms()
            .iter()
            .flat_map(|a| a.vars().map(str::to_string).collect::<Vec<_>>())
            .collect()
    }

    pub fn output_vars(&self) -> Vec<&str> {
        self.view_atoms
            .iter()
            .filter_map(|a| a.output.as_deref())
            .collect()
    }

    /// Rename-insensitive canonical form, used to compare and deduplicate
    /// rewritings. Provenance is dropped.
    pub fn canonical(&self) -> Rewriting {
        let mut renamer = Renamer::new("V");
        for g in &self.grouping {
            renamer.name(g);
        }
        let views = dedup(
            &self
                .view_atoms
                .iter()
                .map(ViewAtom::as_atom)
                .collect::<Vec<_>>(),
        );
        let base = dedup(&self.base_atoms);
        let mut all = views.clone();
        all.extend(base.iter().cloned());
        let order = canonical_order(&all, &mut renamer);
        for v in self.head.vars() {
            renamer.name(v);
        }
        let subst = renamer.substitution();
        let mut view_atoms = Vec::new();
        let mut base_atoms = Vec::new();
        for i in order {
            let atom = subst.apply_atom(&all[i]);
            if i < views.len() {
                let original = &self.view_atoms[self
                    .view_atoms
                    .iter()
                    .position(|a| a.as_atom() == all[i])
                    .expect("view atom present")];
                let mut args = atom.args;
                let output = original.output.as_ref().map(|_| {
                    args.pop()
                        .and_then(|t| t.as_var().map(str::to_string))
                        .expect("output variable")
                });
                view_atoms.push(ViewAtom {
                    view: atom.predicate,
                    args,
                    output,
                });
            } else {
                base_atoms.push(atom);
            }
        }
        Rewriting {
            name: self.name.clone(),
            grouping: self.grouping.iter().map(|g| renamer.lookup(g)).collect(),
            head: self.head.renamed(&renamer),
            view_atoms,
            base_atoms,
            comparisons: normalize_comparisons(&self.comparisons, &subst),
            provenance: Vec::new(),
        }
    }
}
