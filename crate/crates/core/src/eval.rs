//! Bag-set evaluation: base relations are sets, and a query answer occurs
//! once per satisfying assignment of the body variables.
//!
//! Also builds extended databases (views materialized next to the base
//! relations), random databases, and the randomized equivalence oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map as JsonMap, Value as Json};

use crate::error::{Error, Result};
use crate::model::{
    format_rational, AggregateQuery, AggregateTerm, Atom, CmpOp, Comparison, Extremum, HeadExpr,
    Rewriting, Term, ViewSet,
};
use crate::parser::parse_rational;

/// A constant stored in a relation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Num(BigRational),
    Str(String),
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn string(s: impl Into<String>) -> Self {
        Value::Str(s.into())
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Value::Num(n) => Some(n),
            Value::Str(_) => None,
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Value::Num(n) => Term::Num(n.clone()),
            Value::Str(s) => Term::Str(s.clone()),
        }
    }

    /// The value of a constant term; `None` for variables.
    pub fn from_term(t: &Term) -> Option<Value> {
        match t {
            Term::Var(_) => None,
            Term::Num(n) => Some(Value::Num(n.clone())),
            Term::Str(s) => Some(Value::Str(s.clone())),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Num(n) if n.is_integer() => match n.to_integer().to_i64() {
                Some(i) => json!(i),
                None => json!(format_rational(n)),
            },
            Value::Num(n) => json!(format_rational(n)),
            Value::Str(s) => json!(s),
        }
    }

    fn from_json(v: &Json) -> Result<Value> {
        match v {
            Json::String(s) => Ok(parse_rational(s)
                .map(Value::Num)
                .unwrap_or_else(|| Value::Str(s.clone()))),
            Json::Number(n) => parse_rational(&n.to_string())
                .map(Value::Num)
                .ok_or_else(|| Error::InvalidDatabase(format!("unsupported number {n}"))),
            other => Err(Error::InvalidDatabase(format!("unsupported value {other}"))),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_term().fmt(f)
    }
}

fn holds(op: CmpOp, a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => op.holds(x, y),
        _ => false,
    }
}

pub type Tuple = Vec<Value>;

/// A set of tuples. Aggregate answers carry the aggregate value last.
pub type Relation = BTreeSet<Tuple>;

/// Predicate name to relation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    pub relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn insert(&mut self, predicate: &str, tuple: Tuple) {
        self.relations
            .entry(predicate.to_string())
            .or_default()
            .insert(tuple);
    }

    pub fn relation(&self, predicate: &str) -> Option<&Relation> {
        self.relations.get(predicate)
    }

    pub fn is_empty(&self) -> bool {
        self.relations.values().all(BTreeSet::is_empty)
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    /// Parses `{"pred": [["ann", "db", "gr"], ...]}`. Strings that read as
    /// rationals (`"3/2"`) become numbers.
    pub fn from_json(text: &str) -> Result<Database> {
        let json: Json =
            serde_json::from_str(text).map_err(|e| Error::InvalidDatabase(e.to_string()))?;
        let Json::Object(map) = json else {
            return Err(Error::InvalidDatabase(
                "expected an object of relations".into(),
            ));
        };
        let mut db = Database::new();
        for (pred, rows) in map {
            let Json::Array(rows) = rows else {
                return Err(Error::InvalidDatabase(format!(
                    "relation `{pred}` must be an array"
                )));
            };
            let rel = db.relations.entry(pred.clone()).or_default();
            let mut arity = None;
            for row in rows {
                let Json::Array(cells) = row else {
                    return Err(Error::InvalidDatabase(format!(
                        "rows of `{pred}` must be arrays"
                    )));
                };
                if *arity.get_or_insert(cells.len()) != cells.len() {
                    return Err(Error::InvalidDatabase(format!(
                        "rows of `{pred}` have different lengths"
                    )));
                }
                rel.insert(cells.iter().map(Value::from_json).collect::<Result<_>>()?);
            }
        }
        Ok(db)
    }

    pub fn to_json(&self) -> Json {
        let mut map = JsonMap::new();
        for (pred, rel) in &self.relations {
            let rows: Vec<Json> = rel
                .iter()
                .map(|t| Json::Array(t.iter().map(Value::to_json).collect()))
                .collect();
            map.insert(pred.clone(), Json::Array(rows));
        }
        Json::Object(map)
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (pred, rel) in &self.relations {
            for t in rel {
                let args: Vec<String> = t.iter().map(ToString::to_string).collect();
                writeln!(f, "{pred}({}).", args.join(", "))?;
            }
        }
        Ok(())
    }
}

type Assignment = BTreeMap<String, Value>;

/// Enumerates every satisfying assignment of `atoms` and `comparisons`.
fn for_each_assignment(
    atoms: &[Atom],
    comparisons: &[Comparison],
    db: &Database,
    visit: &mut dyn FnMut(&Assignment) -> Result<()>,
) -> Result<()> {
    let mut relations = Vec::with_capacity(atoms.len());
    for a in atoms {
        let rel = db
            .relation(&a.predicate)
            .ok_or_else(|| Error::UnknownPredicate(a.predicate.clone()))?;
        relations.push(rel);
    }
    // atoms with the most bound positions first
    let mut order: Vec<usize> = Vec::new();
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut remaining: Vec<usize> = (0..atoms.len()).collect();
    while !remaining.is_empty() {
        let score = |i: usize| {
            let a = &atoms[i];
            let b = a
                .args
                .iter()
                .filter(|t| t.as_var().is_none_or(|v| bound.contains(v)))
                .count();
            (b, std::cmp::Reverse(relations[i].len()))
        };
        let best = (0..remaining.len())
            .max_by(|&x, &y| {
                score(remaining[x])
                    .cmp(&score(remaining[y]))
                    .then(y.cmp(&x))
            })
            .unwrap();
        let i = remaining.remove(best);
        bound.extend(atoms[i].vars());
        order.push(i);
    }
    // comparisons checked as soon as both sides are bound
    let mut checks: Vec<Vec<&Comparison>> = vec![Vec::new(); atoms.len() + 1];
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut placed = vec![false; comparisons.len()];
    for depth in 0..=atoms.len() {
        if depth > 0 {
            seen.extend(atoms[order[depth - 1]].vars());
        }
        for (k, c) in comparisons.iter().enumerate() {
            if !placed[k] && c.vars().all(|v| seen.contains(v)) {
                placed[k] = true;
                checks[depth].push(c);
            }
        }
    }
    if placed.iter().any(|p| !p) {
        let c = comparisons
            .iter()
            .zip(&placed)
            .find(|(_, p)| !**p)
            .unwrap()
            .0;
        return Err(Error::UnsafeQuery {
            query: "<evaluation>".into(),
            var: c.vars().next().unwrap_or_default().to_string(),
        });
    }
    let mut assignment = Assignment::new();
    join(
        0,
        &order,
        atoms,
        &relations,
        &checks,
        &mut assignment,
        visit,
    )
}

fn value_of(t: &Term, a: &Assignment) -> Option<Value> {
    match t {
        Term::Var(v) => a.get(v).cloned(),
        c => Value::from_term(c),
    }
}

fn join(
    depth: usize,
    order: &[usize],
    atoms: &[Atom],
    relations: &[&Relation],
    checks: &[Vec<&Comparison>],
    assignment: &mut Assignment,
    visit: &mut dyn FnMut(&Assignment) -> Result<()>,
) -> Result<()> {
    for c in &checks[depth] {
        let (Some(l), Some(r)) = (value_of(&c.lhs, assignment), value_of(&c.rhs, assignment))
        else {
            unreachable!("comparison scheduled before its variables are bound");
        };
        if !holds(c.op, &l, &r) {
            return Ok(());
        }
    }
    if depth == order.len() {
        return visit(assignment);
    }
    let i = order[depth];
    let atom = &atoms[i];
    'tuples: for tuple in relations[i] {
        if tuple.len() != atom.arity() {
            return Err(Error::ArityMismatch {
                predicate: atom.predicate.clone(),
                expected: atom.arity(),
                found: tuple.len(),
            });
        }
        let mut added = Vec::new();
        for (t, val) in atom.args.iter().zip(tuple) {
            match t {
                Term::Var(v) => match assignment.get(v) {
                    Some(b) if b == val => {}
                    Some(_) => {
                        for v in added {
                            assignment.remove(v);
                        }
                        continue 'tuples;
                    }
                    None => {
                        assignment.insert(v.clone(), val.clone());
                        added.push(v);
                    }
                },
                c => {
                    if Value::from_term(c).as_ref() != Some(val) {
                        for v in added {
                            assignment.remove(v);
                        }
                        continue 'tuples;
                    }
                }
            }
        }
        let result = join(
            depth + 1,
            order,
            atoms,
            relations,
            checks,
            assignment,
            visit,
        );
        for v in added {
            assignment.remove(v);
        }
        result?;
    }
    Ok(())
}

/// The bag of `(x̄, ȳ)` pairs: one per satisfying assignment, with
/// multiplicities.
pub type Bag = BTreeMap<(Tuple, Tuple), usize>;

/// Evaluates the core of `q`: grouping values and the aggregation value,
/// once per derivation.
pub fn eval_core_bag(q: &AggregateQuery, d: &Database) -> Result<Bag> {
    let mut bag = Bag::new();
    let y: Vec<&str> = q.agg_var().into_iter().collect();
    for_each_assignment(&q.atoms, &q.comparisons, d, &mut |a| {
        let x: Tuple = q.grouping.iter().map(|g| a[g].clone()).collect();
        let yv: Tuple = y.iter().map(|v| a[*v].clone()).collect();
        *bag.entry((x, yv)).or_insert(0) += 1;
        Ok(())
    })?;
    Ok(bag)
}

fn numeric(v: &Value, what: &str) -> Result<BigRational> {
    v.as_num()
        .cloned()
        .ok_or_else(|| Error::TypeError(format!("{what} over the non-numeric value {v}")))
}

/// Groups the core bag by `x̄` and applies the aggregate per nonempty group.
/// Plain queries return their head tuples.
pub fn eval_aggregate(q: &AggregateQuery, d: &Database) -> Result<Relation> {
    let bag = eval_core_bag(q, d)?;
    let Some(agg) = &q.agg else {
        return Ok(bag.into_keys().map(|(x, _)| x).collect());
    };
    let mut groups: BTreeMap<Tuple, Vec<(Tuple, usize)>> = BTreeMap::new();
    for ((x, y), n) in bag {
        groups.entry(x).or_default().push((y, n));
    }
    let mut out = Relation::new();
    for (x, members) in groups {
        let value = match agg {
            AggregateTerm::Count => {
                BigRational::from_integer(members.iter().map(|(_, n)| *n).sum::<usize>().into())
            }
            AggregateTerm::Sum(_) => {
                let mut total = BigRational::zero();
                for (y, n) in &members {
                    total += numeric(&y[0], "SUM")? * BigRational::from_integer((*n).into());
                }
                total
            }
            AggregateTerm::Max(_) | AggregateTerm::Min(_) => {
                let e = agg.extremum().expect("order aggregate");
                let mut best: Option<BigRational> = None;
                for (y, _) in &members {
                    let v = numeric(&y[0], e.keyword())?;
                    best = Some(match best {
                        None => v,
                        Some(b) => e.pick(&b, &v).clone(),
                    });
                }
                best.expect("nonempty group")
            }
        };
        let mut row = x;
        row.push(Value::Num(value));
        out.insert(row);
    }
    Ok(out)
}

fn product(factors: &[String], a: &Assignment) -> Result<BigRational> {
    let mut p = BigRational::one();
    for f in factors {
        p *= numeric(&a[f], "product")?;
    }
    Ok(p)
}

fn exact_root(value: &BigRational, degree: u32) -> Result<BigRational> {
    let fail = || {
        Error::TypeError(format!(
            "{} has no rational root of degree {degree}",
            format_rational(value)
        ))
    };
    if degree == 0 || (value.is_negative() && degree.is_multiple_of(2)) {
        return Err(fail());
    }
    let root = |n: &BigInt| {
        let r = n.nth_root(degree);
        if num::pow(r.clone(), degree as usize) == *n {
            Some(r)
        } else {
            None
        }
    };
    match (root(value.numer()), root(value.denom())) {
        (Some(n), Some(d)) => Ok(BigRational::new(n, d)),
        _ => Err(fail()),
    }
}

/// Evaluates a rewriting over an extended database.
pub fn eval_rewriting(r: &Rewriting, d: &Database) -> Result<Relation> {
    let atoms = r.body_atoms();
    let mut groups: BTreeMap<Tuple, Vec<Assignment>> = BTreeMap::new();
    for_each_assignment(&atoms, &r.comparisons, d, &mut |a| {
        let x: Tuple = r.grouping.iter().map(|g| a[g].clone()).collect();
        groups.entry(x).or_default().push(a.clone());
        Ok(())
    })?;
    let mut out = Relation::new();
    for (x, members) in groups {
        let mut emit = |v: BigRational| {
            let mut row = x.clone();
            row.push(Value::Num(v));
            out.insert(row);
        };
        match &r.head {
            HeadExpr::Sum(factors) => {
                let mut total = BigRational::zero();
                for a in &members {
                    total += product(factors, a)?;
                }
                emit(total);
            }
            HeadExpr::Extremum(e, y) => {
                let mut best: Option<BigRational> = None;
                for a in &members {
                    let v = numeric(&a[y], e.keyword())?;
                    best = Some(match (best, e) {
                        (None, _) => v,
                        (Some(b), Extremum::Max) => b.max(v),
                        (Some(b), Extremum::Min) => b.min(v),
                    });
                }
                emit(best.expect("nonempty group"));
            }
            HeadExpr::Product { factors, .. } => {
                for a in &members {
                    emit(product(factors, a)?);
                }
            }
            HeadExpr::Root { degree, factors } => {
                for a in &members {
                    emit(exact_root(&product(factors, a)?, *degree)?);
                }
            }
        }
    }
    Ok(out)
}

/// `d` plus one materialized relation per view.
pub fn extend_database(d: &Database, vs: &ViewSet) -> Result<Database> {
    let mut out = d.clone();
    for v in vs.iter() {
        let rel = eval_aggregate(v, d)?;
        out.relations.insert(v.name.clone(), rel);
    }
    Ok(out)
}

/// Shape of random databases.
#[derive(Clone, Debug)]
pub struct SizeParams {
    pub min_tuples: usize,
    pub max_tuples: usize,
    /// Number of string constants `c0, c1, ...` to draw from.
    pub pool_size: usize,
    /// Rational constants to draw from.
    pub grid: Vec<BigRational>,
    /// Additional constants, usually those mentioned by the queries.
    pub constants: Vec<Value>,
    /// Columns that only receive rationals, by predicate.
    pub numeric_columns: BTreeMap<String, BTreeSet<usize>>,
}

impl Default for SizeParams {
    fn default() -> Self {
        SizeParams {
            min_tuples: 0,
            max_tuples: 6,
            pool_size: 3,
            grid: [(0, 1), (1, 1), (2, 1), (3, 1), (1, 2)]
                .iter()
                .map(|&(n, d)| BigRational::new(n.into(), d.into()))
                .collect(),
            constants: Vec::new(),
            numeric_columns: BTreeMap::new(),
        }
    }
}

/// A random database over `schema`, deterministic in `seed`.
pub fn random_database(
    schema: &BTreeMap<String, usize>,
    params: &SizeParams,
    seed: u64,
) -> Database {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let numbers: Vec<Value> = {
        let mut set: BTreeSet<Value> = params.grid.iter().cloned().map(Value::Num).collect();
        set.extend(
            params
                .constants
                .iter()
                .filter(|c| c.as_num().is_some())
                .cloned(),
        );
        set.into_iter().collect()
    };
    let mixed: Vec<Value> = {
        let mut set: BTreeSet<Value> = (0..params.pool_size)
            .map(|i| Value::Str(format!("c{i}")))
            .collect();
        set.extend(numbers.iter().cloned());
        set.extend(params.constants.iter().cloned());
        set.into_iter().collect()
    };
    let mut db = Database::new();
    for (pred, &arity) in schema {
        let rel = db.relations.entry(pred.clone()).or_default();
        if params.max_tuples == 0 {
            continue;
        }
        let n = rng.gen_range(params.min_tuples.min(params.max_tuples)..=params.max_tuples);
        let numeric = params.numeric_columns.get(pred);
        for _ in 0..n {
            let tuple: Tuple = (0..arity)
                .map(|i| {
                    let from = if numeric.is_some_and(|c| c.contains(&i)) {
                        &numbers
                    } else {
                        &mixed
                    };
                    from.choose(&mut rng)
                        .cloned()
                        .unwrap_or_else(|| Value::int(0))
                })
                .collect();
            rel.insert(tuple);
        }
    }
    db
}

/// Something the oracle can evaluate over an extended database.
pub trait Evaluate {
    fn evaluate(&self, extended: &Database) -> Result<Relation>;
    fn body_atoms(&self) -> Vec<Atom>;
    /// Variables whose values are aggregated or multiplied.
    fn numeric_vars(&self) -> Vec<String>;
    fn constants(&self) -> Vec<Value>;
}

fn atom_constants(atoms: &[Atom], comps: &[Comparison]) -> Vec<Value> {
    atoms
        .iter()
        .flat_map(|a| a.args.iter())
        .chain(comps.iter().flat_map(|c| [&c.lhs, &c.rhs]))
        .filter_map(Value::from_term)
        .collect()
}

impl Evaluate for AggregateQuery {
    fn evaluate(&self, extended: &Database) -> Result<Relation> {
        eval_aggregate(self, extended)
    }

    fn body_atoms(&self) -> Vec<Atom> {
        self.atoms.clone()
    }

    fn numeric_vars(&self) -> Vec<String> {
        match &self.agg {
            Some(AggregateTerm::Count) | None => Vec::new(),
            Some(a) => a.var().into_iter().map(String::from).collect(),
        }
    }

    fn constants(&self) -> Vec<Value> {
        atom_constants(&self.atoms, &self.comparisons)
    }
}

impl Evaluate for Rewriting {
    fn evaluate(&self, extended: &Database) -> Result<Relation> {
        eval_rewriting(self, extended)
    }

    fn body_atoms(&self) -> Vec<Atom> {
        Rewriting::body_atoms(self)
    }

    fn numeric_vars(&self) -> Vec<String> {
        self.head.vars().into_iter().map(String::from).collect()
    }

    fn constants(&self) -> Vec<Value> {
        atom_constants(&Rewriting::body_atoms(self), &self.comparisons)
    }
}

/// Outcome of randomized testing. There is deliberately no "equivalent".
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    NoCounterexampleFound { trials: usize },
    Counterexample(Database),
}

impl Verdict {
    pub fn is_counterexample(&self) -> bool {
        matches!(self, Verdict::Counterexample(_))
    }
}

/// Base schema, numeric columns and constants for testing `queries` over
/// the views `vs`.
pub fn oracle_params<'a>(
    queries: impl IntoIterator<Item = &'a dyn Evaluate>,
    vs: &ViewSet,
) -> (BTreeMap<String, usize>, SizeParams) {
    let mut schema: BTreeMap<String, usize> = vs.base_schema().clone();
    let mut params = SizeParams::default();
    let mut constants: BTreeSet<Value> = BTreeSet::new();
    let mark = |atoms: &[Atom],
                vars: &[String],
                schema: &mut BTreeMap<String, usize>,
                params: &mut SizeParams| {
        for a in atoms {
            if vs.is_view(&a.predicate) {
                continue;
            }
            schema.entry(a.predicate.clone()).or_insert(a.arity());
            for (i, t) in a.args.iter().enumerate() {
                if t.as_var().is_some_and(|v| vars.iter().any(|n| n == v)) {
                    params
                        .numeric_columns
                        .entry(a.predicate.clone())
                        .or_default()
                        .insert(i);
                }
            }
        }
    };
    for q in queries {
        mark(&q.body_atoms(), &q.numeric_vars(), &mut schema, &mut params);
        constants.extend(q.constants());
    }
    for v in vs.iter() {
        mark(
            &v.atoms,
            &Evaluate::numeric_vars(v),
            &mut schema,
            &mut params,
        );
        constants.extend(Evaluate::constants(v));
    }
    params.constants = constants.into_iter().collect();
    (schema, params)
}

/// Evaluates `q1` and `q2` over `trials` random databases extended with
/// `vs`, returning the first database on which they differ.
pub fn oracle_equivalent(
    q1: &dyn Evaluate,
    q2: &dyn Evaluate,
    vs: &ViewSet,
    trials: usize,
    seed: u64,
) -> Result<Verdict> {
    let (schema, params) = oracle_params([q1, q2], vs);
    oracle_equivalent_with(q1, q2, vs, trials, seed, &schema, &params)
}

/// [`oracle_equivalent`] with an explicit schema and database shape. The
/// tuple count cycles through `1..=max_tuples` so small databases are tried
/// early.
pub fn oracle_equivalent_with(
    q1: &dyn Evaluate,
    q2: &dyn Evaluate,
    vs: &ViewSet,
    trials: usize,
    seed: u64,
    schema: &BTreeMap<String, usize>,
    params: &SizeParams,
) -> Result<Verdict> {
    for trial in 0..trials {
        let mut p = params.clone();
        p.max_tuples = 1 + trial % params.max_tuples.max(1);
        p.min_tuples = p.max_tuples / 2;
        let d = random_database(schema, &p, seed.wrapping_add(trial as u64));
        let ext = extend_database(&d, vs);
        let (r1, r2) = match ext {
            Ok(ext) => (q1.evaluate(&ext), q2.evaluate(&ext)),
            Err(Error::TypeError(_)) => continue,
            Err(e) => return Err(e),
        };
        match (r1, r2) {
            (Ok(a), Ok(b)) if a != b => return Ok(Verdict::Counterexample(d)),
            (Ok(_), Ok(_)) | (Err(Error::TypeError(_)), _) | (_, Err(Error::TypeError(_))) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(Verdict::NoCounterexampleFound { trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_query, parse_rewriting, parse_views};

    fn s(x: &str) -> Value {
        Value::string(x)
    }

    fn running_db() -> Database {
        Database::from_json(
            r#"{"ta": [["ann","db","gr"],["bob","db","gr"]],
                "salaries": [["gr","univ",600],["gr","govt",400]]}"#,
        )
        .unwrap()
    }

    fn running_views() -> ViewSet {
        parse_views(
            "view v_positions_per_type(J; count) :- ta(N, C, J).\n\
             view v_salary_for_ta_job(J; sum(A)) :- salaries(J, S, A).",
        )
        .unwrap()
    }

    #[test]
    fn core_bag_counts_derivations() {
        let q = parse_query("q(J; sum(A)) :- ta(N, C, J), salaries(J, S, A).").unwrap();
        let bag = eval_core_bag(&q, &running_db()).unwrap();
        // two ta rows times two salary rows, split by amount
        assert_eq!(bag.len(), 2);
        assert_eq!(bag[&(vec![s("gr")], vec![Value::int(600)])], 2);
        assert_eq!(bag[&(vec![s("gr")], vec![Value::int(400)])], 2);
        assert!(eval_core_bag(
            &q,
            &Database::from_json(r#"{"ta":[],"salaries":[]}"#).unwrap()
        )
        .unwrap()
        .is_empty());

        let q = parse_query("q(X; count) :- p(X,Y), p(X,Z).").unwrap();
        let d = Database::from_json(r#"{"p": [["a",1],["a",2]]}"#).unwrap();
        let bag = eval_core_bag(&q, &d).unwrap();
        assert_eq!(bag.values().sum::<usize>(), 4);
    }

    #[test]
    fn aggregate_answers() {
        let q = parse_query("q(J; sum(A)) :- ta(N, C, J), salaries(J, S, A).").unwrap();
        let out = eval_aggregate(&q, &running_db()).unwrap();
        assert_eq!(out, [vec![s("gr"), Value::int(2000)]].into_iter().collect());
        let v = parse_query("v(J; count) :- ta(N, C, J).").unwrap();
        assert_eq!(
            eval_aggregate(&v, &running_db()).unwrap(),
            [vec![s("gr"), Value::int(2)]].into_iter().collect()
        );
        let empty = Database::from_json(r#"{"ta":[],"salaries":[]}"#).unwrap();
        assert!(eval_aggregate(&q, &empty).unwrap().is_empty());
    }

    #[test]
    fn sum_over_strings_is_a_type_error() {
        let q = parse_query("q(; sum(X)) :- p(X).").unwrap();
        let d = Database::from_json(r#"{"p": [["a"]]}"#).unwrap();
        assert!(matches!(eval_aggregate(&q, &d), Err(Error::TypeError(_))));
    }

    #[test]
    fn extended_database() {
        let d = running_db();
        assert_eq!(extend_database(&d, &ViewSet::default()).unwrap(), d);
        let ext = extend_database(&d, &running_views()).unwrap();
        assert_eq!(
            ext.relations["v_positions_per_type"],
            [vec![s("gr"), Value::int(2)]].into_iter().collect()
        );
        assert_eq!(
            ext.relations["v_salary_for_ta_job"],
            [vec![s("gr"), Value::int(1000)]].into_iter().collect()
        );
        let empty = Database::from_json(r#"{"ta":[],"salaries":[]}"#).unwrap();
        let ext = extend_database(&empty, &running_views()).unwrap();
        assert!(ext.relations["v_positions_per_type"].is_empty());
    }

    #[test]
    fn rewriting_evaluation() {
        let vs = running_views();
        let r = parse_rewriting(
            "r(J; A*CNT) :- v_positions_per_type(J; CNT), v_salary_for_ta_job(J; A).",
            &vs,
        )
        .unwrap();
        let ext = extend_database(&running_db(), &vs).unwrap();
        assert_eq!(
            eval_rewriting(&r, &ext).unwrap(),
            [vec![s("gr"), Value::int(2000)]].into_iter().collect()
        );
    }

    #[test]
    fn random_databases() {
        let schema: BTreeMap<String, usize> = [("p".to_string(), 2), ("r".to_string(), 1)]
            .into_iter()
            .collect();
        let params = SizeParams::default();
        assert_eq!(
            random_database(&schema, &params, 7),
            random_database(&schema, &params, 7)
        );
        let none = SizeParams {
            max_tuples: 0,
            ..SizeParams::default()
        };
        assert!(random_database(&schema, &none, 7).is_empty());
        let strings = SizeParams {
            min_tuples: 5,
            max_tuples: 5,
            grid: Vec::new(),
            ..SizeParams::default()
        };
        let d = random_database(&schema, &strings, 3);
        let pool: BTreeSet<Value> = (0..3).map(|i| Value::Str(format!("c{i}"))).collect();
        assert!(d.relations["p"].iter().flatten().all(|v| pool.contains(v)));
    }

    #[test]
    fn oracle() {
        let vs = running_views();
        let q = parse_query("q(J; sum(A)) :- ta(N, C, J), salaries(J, S, A).").unwrap();
        let r = parse_rewriting(
            "r(J; A*CNT) :- v_positions_per_type(J; CNT), v_salary_for_ta_job(J; A).",
            &vs,
        )
        .unwrap();
        assert_eq!(
            oracle_equivalent(&q, &r, &vs, 200, 0).unwrap(),
            Verdict::NoCounterexampleFound { trials: 200 }
        );
        assert_eq!(
            oracle_equivalent(&q, &q, &vs, 50, 0).unwrap(),
            Verdict::NoCounterexampleFound { trials: 50 }
        );

        let q1 = parse_query("q(X; count) :- p(X,Y).").unwrap();
        let q2 = parse_query("q(X; count) :- p(X,Y), p(X,Z).").unwrap();
        let Verdict::Counterexample(d) =
            oracle_equivalent(&q1, &q2, &ViewSet::default(), 200, 0).unwrap()
        else {
            panic!("expected a counterexample");
        };
        assert_ne!(
            eval_aggregate(&q1, &d).unwrap(),
            eval_aggregate(&q2, &d).unwrap()
        );
    }

    #[test]
    fn exact_roots() {
        let v = BigRational::new(9.into(), 4.into());
        assert_eq!(
            exact_root(&v, 2).unwrap(),
            BigRational::new(3.into(), 2.into())
        );
        assert!(exact_root(&BigRational::from_integer(2.into()), 2).is_err());
    }
}
