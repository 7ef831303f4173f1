//! Random queries, views and constraint sets for property tests.
//!
//! Views are cut from the query itself: a subset of its body, renamed
//! apart, with a random head. That keeps the share of instances that admit
//! a rewriting high enough for the properties to say something.

use std::collections::{BTreeMap, BTreeSet};

use num::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{
    AggKind, AggregateQuery, AggregateTerm, Atom, CmpOp, Comparison, Term, ViewSet,
};

/// Shape of generated instances.
#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Predicates with their arities.
    pub predicates: Vec<(String, usize)>,
    pub max_atoms: usize,
    pub max_vars: usize,
    pub max_views: usize,
    /// Upper bound on comparisons per query; zero gives relational queries.
    pub max_comparisons: usize,
    /// Chance that an argument is a constant instead of a variable.
    pub constant_rate: f64,
    /// Constants used in atoms and comparisons.
    pub constants: Vec<BigRational>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            predicates: vec![("p".into(), 2), ("s".into(), 2), ("t".into(), 1)],
            max_atoms: 3,
            max_vars: 4,
            max_views: 2,
            max_comparisons: 2,
            constant_rate: 0.05,
            constants: (0..3)
                .map(|i| BigRational::from_integer(i.into()))
                .collect(),
        }
    }
}

impl GenConfig {
    pub fn relational() -> Self {
        GenConfig {
            max_comparisons: 0,
            constant_rate: 0.0,
            ..GenConfig::default()
        }
    }
}

const QUERY_VARS: [&str; 6] = ["X", "Y", "U", "W", "S", "T"];
const VIEW_VARS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

fn random_comparison<R: Rng>(rng: &mut R, vars: &[String], cfg: &GenConfig) -> Comparison {
    let op = if rng.gen_bool(0.5) {
        CmpOp::Lt
    } else {
        CmpOp::Le
    };
    let var = |rng: &mut R| Term::Var(vars.choose(rng).expect("a variable").clone());
    let constant = |rng: &mut R| Term::Num(cfg.constants.choose(rng).expect("a constant").clone());
    let (lhs, rhs) = match rng.gen_range(0..3) {
        0 if vars.len() > 1 => {
            let mut two: Vec<&String> = vars.choose_multiple(rng, 2).collect();
            two.shuffle(rng);
            (Term::Var(two[0].clone()), Term::Var(two[1].clone()))
        }
        1 => (constant(rng), var(rng)),
        _ => (var(rng), constant(rng)),
    };
    Comparison::new(lhs, op, rhs)
}

/// A random safe query of the given kind (`None` for a plain conjunctive
/// query). The aggregation variable is never a grouping variable.
pub fn random_query<R: Rng>(
    rng: &mut R,
    cfg: &GenConfig,
    kind: Option<AggKind>,
    name: &str,
) -> AggregateQuery {
    loop {
        let n_atoms = rng.gen_range(1..=cfg.max_atoms);
        let n_vars = rng.gen_range(1..=cfg.max_vars.min(QUERY_VARS.len()));
        let atoms: Vec<Atom> = (0..n_atoms)
            .map(|_| {
                let (pred, arity) = cfg.predicates.choose(rng).expect("a predicate").clone();
                let args = (0..arity)
                    .map(|_| {
                        if rng.gen_bool(cfg.constant_rate) {
                            Term::Num(cfg.constants.choose(rng).expect("a constant").clone())
                        } else {
                            Term::var(QUERY_VARS[rng.gen_range(0..n_vars)])
                        }
                    })
                    .collect();
                Atom::new(pred, args)
            })
            .collect();
        let vars: Vec<String> = {
            let set: BTreeSet<&str> = atoms.iter().flat_map(Atom::vars).collect();
            set.into_iter().map(String::from).collect()
        };
        if vars.is_empty() {
            continue;
        }
        let agg = match kind {
            None | Some(AggKind::Count) => kind.map(|_| AggregateTerm::Count),
            Some(k) => {
                let y = vars.choose(rng).expect("a variable").clone();
                Some(match k {
                    AggKind::Sum => AggregateTerm::Sum(y),
                    AggKind::Max => AggregateTerm::Max(y),
                    _ => AggregateTerm::Min(y),
                })
            }
        };
        let y = agg.as_ref().and_then(|a| a.var()).map(String::from);
        let grouping: Vec<String> = vars
            .iter()
            .filter(|v| Some(*v) != y.as_ref() && rng.gen_bool(0.5))
            .cloned()
            .collect();
        if kind.is_none() && grouping.is_empty() {
            continue;
        }
        let n_cmp = rng.gen_range(0..=cfg.max_comparisons);
        let comparisons: Vec<Comparison> = (0..n_cmp)
            .map(|_| random_comparison(rng, &vars, cfg))
            .collect();
        let q = AggregateQuery::new(name, grouping, agg, atoms, comparisons)
            .expect("generated queries are safe");
        return q;
    }
}

/// Views cut from random subsets of `q`'s body. View kinds follow the
/// query: COUNT queries get COUNT views, SUM queries COUNT and SUM views,
/// MAX and MIN queries plain and same-kind views.
pub fn random_views<R: Rng>(rng: &mut R, q: &AggregateQuery, cfg: &GenConfig) -> ViewSet {
    let n_views = rng.gen_range(1..=cfg.max_views);
    let mut views = Vec::new();
    for i in 0..n_views {
        let mut picked: Vec<usize> = (0..q.atoms.len()).filter(|_| rng.gen_bool(0.6)).collect();
        if picked.is_empty() {
            picked.push(rng.gen_range(0..q.atoms.len()));
        }
        let atoms: Vec<&Atom> = picked.iter().map(|&j| &q.atoms[j]).collect();
        let mut rename: BTreeMap<&str, String> = BTreeMap::new();
        for v in atoms.iter().flat_map(|a| a.vars()) {
            let next = VIEW_VARS[rename.len() % VIEW_VARS.len()].to_string();
            rename.entry(v).or_insert(next);
        }
        let outside: BTreeSet<&str> = q
            .atoms
            .iter()
            .enumerate()
            .filter(|(j, _)| !picked.contains(j))
            .flat_map(|(_, a)| a.vars())
            .chain(q.grouping.iter().map(String::as_str))
            .collect();
        let y = q.agg_var();
        let agg = match q.kind() {
            Some(AggKind::Count) => Some(AggregateTerm::Count),
            Some(AggKind::Sum) => match y.and_then(|y| rename.get(y)) {
                Some(a) if rng.gen_bool(0.4) => Some(AggregateTerm::Sum(a.clone())),
                _ => Some(AggregateTerm::Count),
            },
            Some(k @ (AggKind::Max | AggKind::Min)) => match y.and_then(|y| rename.get(y)) {
                Some(a) if rng.gen_bool(0.4) => Some(if k == AggKind::Max {
                    AggregateTerm::Max(a.clone())
                } else {
                    AggregateTerm::Min(a.clone())
                }),
                _ => None,
            },
            None => None,
        };
        let agg_var = agg.as_ref().and_then(|a| a.var()).map(String::from);
        let grouping: Vec<String> = rename
            .iter()
            .filter(|(v, w)| {
                Some(*w) != agg_var.as_ref() && {
                    let keep = if outside.contains(*v) || Some(**v) == y {
                        0.85
                    } else {
                        0.4
                    };
                    rng.gen_bool(keep)
                }
            })
            .map(|(_, w)| w.clone())
            .collect();
        if agg.is_none() && grouping.is_empty() {
            continue;
        }
        let renamed = |t: &Term| match t {
            Term::Var(v) => Term::Var(rename[v.as_str()].clone()),
            k => k.clone(),
        };
        let body: Vec<Atom> = atoms
            .iter()
            .map(|a| Atom::new(a.predicate.clone(), a.args.iter().map(renamed).collect()))
            .collect();
        let comparisons: Vec<Comparison> = q
            .comparisons
            .iter()
            .filter(|c| c.vars().all(|v| rename.contains_key(v)) && rng.gen_bool(0.7))
            .map(|c| Comparison::new(renamed(&c.lhs), c.op, renamed(&c.rhs)))
            .collect();
        let v = AggregateQuery::new(format!("v{}", i + 1), grouping, agg, body, comparisons)
            .expect("generated views are safe");
        views.push(v);
    }
    ViewSet::new(views).expect("generated views are well formed")
}

/// A random query of `kind` with views cut from it.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    cfg: &GenConfig,
    kind: AggKind,
) -> (AggregateQuery, ViewSet) {
    loop {
        let q = random_query(rng, cfg, Some(kind), "q");
        let vs = random_views(rng, &q, cfg);
        if !vs.is_empty() {
            return (q, vs);
        }
    }
}

/// Up to `max_len` random comparisons over the variables `X0..X{n-1}` and
/// the configured constants.
pub fn random_constraints<R: Rng>(
    rng: &mut R,
    n_vars: usize,
    max_len: usize,
    cfg: &GenConfig,
) -> Vec<Comparison> {
    let vars: Vec<String> = (0..n_vars).map(|i| format!("X{i}")).collect();
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| random_comparison(rng, &vars, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_instances_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = GenConfig::default();
        for kind in [AggKind::Count, AggKind::Sum, AggKind::Max, AggKind::Min] {
            for _ in 0..50 {
                let (q, vs) = random_instance(&mut rng, &cfg, kind);
                assert_eq!(q.kind(), Some(kind));
                assert!(q
                    .agg_var()
                    .is_none_or(|y| !q.grouping.iter().any(|g| g == y)));
                for v in vs.iter() {
                    assert!(v
                        .atoms
                        .iter()
                        .all(|a| q.atoms.iter().any(|b| b.predicate == a.predicate)));
                }
            }
        }
    }

    #[test]
    fn relational_config_has_no_comparisons() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q = random_query(
                &mut rng,
                &GenConfig::relational(),
                Some(AggKind::Count),
                "q",
            );
            assert!(q.is_relational());
        }
    }
}
