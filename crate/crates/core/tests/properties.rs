//! Property tests over generated queries.

use std::collections::BTreeMap;

use aggview::gen::{random_constraints, random_instance, random_query, GenConfig};
use aggview::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const KINDS: [Option<AggKind>; 5] = [
    None,
    Some(AggKind::Count),
    Some(AggKind::Sum),
    Some(AggKind::Max),
    Some(AggKind::Min),
];

fn schema() -> Schema {
    parse_schema(r#"{"p": ["a", "b"], "s": ["c", "d"], "t": ["e"]}"#).unwrap()
}

/// Renames variables through a shuffled bijection and shuffles the body.
fn scramble(q: &AggregateQuery, r: &mut ChaCha8Rng) -> AggregateQuery {
    let vars: Vec<String> = q.atom_vars().into_iter().map(String::from).collect();
    let mut names: Vec<String> = (0..vars.len()).map(|i| format!("R{i}")).collect();
    names.shuffle(r);
    let s: Substitution = vars
        .iter()
        .cloned()
        .zip(names.into_iter().map(Term::Var))
        .collect();
    let rename = |v: &String| s.apply_var(v).as_var().unwrap().to_string();
    let mut atoms: Vec<Atom> = q.atoms.iter().map(|a| s.apply_atom(a)).collect();
    atoms.shuffle(r);
    AggregateQuery {
        name: format!("{}_scrambled", q.name),
        grouping: q.grouping.iter().map(rename).collect(),
        agg: q.agg.as_ref().map(|a| match a.var() {
            Some(y) => a.with_var(rename(&y.to_string())),
            None => a.clone(),
        }),
        atoms,
        comparisons: q
            .comparisons
            .iter()
            .map(|c| s.apply_comparison(c))
            .collect(),
    }
}

fn databases(q: &AggregateQuery, n: u64, seed: u64) -> Vec<Database> {
    let (schema, params) = eval::oracle_params([q as &dyn Evaluate], &ViewSet::default());
    (0..n)
        .map(|i| random_database(&schema, &params, seed.wrapping_add(i)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>(), k in 0usize..5) {
        let q = random_query(&mut rng(seed), &GenConfig::default(), KINDS[k], "q");
        let once = q.normalize().unwrap();
        prop_assert_eq!(once.normalize().unwrap(), once.clone());
        for d in databases(&q, 5, seed) {
            prop_assert_eq!(eval_aggregate(&q, &d).unwrap(), eval_aggregate(&once, &d).unwrap());
        }
    }

    #[test]
    fn sql_round_trip(seed in any::<u64>(), k in 0usize..5) {
        let q = random_query(&mut rng(seed), &GenConfig::default(), KINDS[k], "q");
        let sql = datalog_to_sql(&q, &schema()).unwrap();
        let back = sql_text_to_datalog(&sql.to_string(), &schema(), "q").unwrap();
        prop_assert_eq!(back.normalize().unwrap(), q.normalize().unwrap(), "via {}", sql);
        for d in databases(&q, 5, seed) {
            prop_assert_eq!(eval_aggregate(&q, &d).unwrap(), eval_aggregate(&back, &d).unwrap());
        }
    }

    #[test]
    fn isomorphism_survives_renaming(seed in any::<u64>(), k in 1usize..5) {
        let mut r = rng(seed);
        let q = random_query(&mut r, &GenConfig::default(), KINDS[k], "q");
        let q2 = scramble(&q, &mut r);
        let q3 = scramble(&q2, &mut r);
        prop_assert!(isomorphic_queries(&q, &q2).unwrap().is_some());
        prop_assert!(isomorphic_queries(&q2, &q).unwrap().is_some());
        prop_assert!(isomorphic_queries(&q, &q3).unwrap().is_some());
        for d in databases(&q, 5, seed) {
            prop_assert_eq!(eval_aggregate(&q, &d).unwrap(), eval_aggregate(&q2, &d).unwrap());
        }
    }

    #[test]
    fn closure_is_sound(seed in any::<u64>(), n in 1usize..5) {
        let cs = random_constraints(&mut rng(seed), n, 5, &GenConfig::default());
        let set = ConstraintSet::from(cs);
        if let Ok(closed) = deductive_closure(&set) {
            prop_assert!(consistent(&set));
            prop_assert!(equivalent_constraints(&set, &closed));
        } else {
            prop_assert!(!consistent(&set));
        }
    }

    #[test]
    fn emitted_rewritings_are_never_refuted(seed in any::<u64>(), k in 1usize..5) {
        let (q, vs) = random_instance(&mut rng(seed), &GenConfig::default(), KINDS[k].unwrap());
        let opts = Options { all: true, ..Options::default() };
        for r in rewrite(&q, &vs, None, opts).unwrap() {
            let verdict = verify_rewriting_with(&q, &r, &vs, 50, seed).unwrap();
            prop_assert!(!verdict.is_refuted(), "{} for {}: {:?}", r, q, verdict);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_query(&mut r, &GenConfig::default(), KINDS[(seed % 5) as usize], "q");
        let vs = aggview::gen::random_views(&mut r, &q, &GenConfig::default());
        let mut text = q.to_string();
        for v in vs.iter() {
            text.push('\n');
            text.push_str(&aggview::parser::render_view(v));
        }
        let program = parse_program(&text).unwrap();
        let parsed: Vec<&AggregateQuery> = program.queries().chain(program.views()).collect();
        let original: Vec<&AggregateQuery> = std::iter::once(&q).chain(vs.iter()).collect();
        prop_assert_eq!(parsed.len(), original.len());
        let by_name: BTreeMap<&str, &AggregateQuery> = parsed.iter().map(|p| (p.name.as_str(), *p)).collect();
        for o in original {
            let p = by_name.get(o.name.as_str()).expect("parsed");
            prop_assert_eq!(p.normalize().unwrap(), o.normalize().unwrap());
        }
    }
}
