//! End-to-end runs of the `aggview` binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const SALARY_QUERY: &str = "q(J; sum(A)) :- ta(N, C, J), salaries(J, S, A).\n";
const SALARY_VIEWS: &str = "v_positions_per_type(J; count) :- ta(N, C, J).\n\
                            v_salary_for_ta_job(J; sum(A)) :- salaries(J, S, A).\n";
const POSITIONS_QUERY: &str = "q_positions_per_type(J; count) :- ta(N, C, J).\n";
const POSITIONS_VIEWS: &str = "v_positions_per_type(J; count) :- ta(N, C, J).\n";
const TA_SCHEMA: &str = r#"{"ta": ["name", "course_name", "job_type"],
                            "salaries": ["job_type", "sponsorship", "amount"]}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: TempDir::new().expect("temp dir"),
        }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, text).expect("write fixture");
        path
    }
}

fn aggview<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_aggview"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn schema() -> jsonschema::JSONSchema {
    let text = include_str!("../schema/output.schema.json");
    let value: Value = serde_json::from_str(text).expect("schema parses");
    jsonschema::JSONSchema::compile(&value).expect("schema compiles")
}

fn assert_valid(stdout: &str) -> Value {
    let value: Value = serde_json::from_str(stdout).expect("stdout is JSON");
    let schema = schema();
    if let Err(errors) = schema.validate(&value) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{e} at {}", e.instance_path))
            .collect();
        panic!("output does not match the schema: {msgs:?}\n{stdout}");
    };
    value
}

#[test]
fn rewrite_salary_pipeline() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", SALARY_QUERY);
    let v = ws.file("v.dl", SALARY_VIEWS);
    for mode in ["sum", "auto"] {
        let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v), "--mode", mode]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        assert_eq!(
            run.stdout,
            "r_q(J; A*Z1) :- v_positions_per_type(J; Z1), v_salary_for_ta_job(J; A).\n"
        );
    }
}

#[test]
fn rewrite_json_matches_schema() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", SALARY_QUERY);
    let v = ws.file("v.dl", SALARY_VIEWS);
    let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v), "--json", "--all"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let value = assert_valid(&run.stdout);
    assert_eq!(value["mode"], "sum");
    assert_eq!(value["rewritings"].as_array().unwrap().len(), 1);
}

#[test]
fn rewrite_count_modes_and_flags() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", POSITIONS_QUERY);
    let v = ws.file("v.dl", POSITIONS_VIEWS);
    let expected = "r_q_positions_per_type(J; Z1) :- v_positions_per_type(J; Z1).\n";
    for extra in [
        &[][..],
        &["--mode", "count"],
        &["--all"],
        &["--no-close"],
        &["--partial"],
        &["--all", "--partial", "--no-close"],
    ] {
        let mut args = vec!["rewrite", "-q", p(&q), "-v", p(&v)];
        args.extend_from_slice(extra);
        let run = aggview(&args);
        assert_eq!(run.code, 0, "{extra:?}: {}", run.stderr);
        assert!(run.stdout.contains(expected), "{extra:?}: {}", run.stdout);
    }
}

#[test]
fn rewrite_partial_keeps_base_atoms() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", "q(X; count) :- p(X, W), s(X).\n");
    let v = ws.file("v.dl", "v(X; count) :- p(X, W).\n");
    let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v)]);
    assert_eq!(run.code, 1);
    assert_eq!(run.stdout, "no rewriting found\n");
    let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v), "--partial"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.contains("v(X; Z1), s(X)."), "{}", run.stdout);
}

#[test]
fn rewrite_closure_flag_matters() {
    let ws = Workspace::new();
    let q = ws.file(
        "q.dl",
        "q(; count) :- p1(X), p2(Y), X < Y, Y < 2, p3(U), p4(W), U < W, W < 2.\n",
    );
    let v = ws.file(
        "v.dl",
        "v1(X, U; count) :- p1(X), p2(Y), X < Y, Y < 2, p3(U), U < 2.\n\
         v2(X, U; count) :- p3(U), p4(W), U < W, W < 2, p1(X), X < 2.\n",
    );
    let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(
        run.stdout,
        "r_q(; sum(Z1*Z2)) :- v1(X, U; Z1), v2(X, U; Z2).\n"
    );
    let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v), "--no-close", "--json"]);
    assert_eq!(run.code, 1);
    let value = assert_valid(&run.stdout);
    assert!(value["rewritings"].as_array().unwrap().is_empty());
}

#[test]
fn rewrite_max_and_min() {
    let ws = Workspace::new();
    let v = ws.file("v.dl", "v(X, Y) :- p(X, Y).\n");
    for (agg, mode) in [("max", "max"), ("min", "min"), ("max", "auto")] {
        let q = ws.file("q.dl", &format!("q(X; {agg}(Y)) :- p(X, Y).\n"));
        let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v), "--mode", mode]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        assert_eq!(run.stdout, format!("r_q(X; {agg}(Y)) :- v(X, Y).\n"));
    }
}

#[test]
fn rewrite_mode_mismatch_is_an_input_error() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", SALARY_QUERY);
    let v = ws.file("v.dl", SALARY_VIEWS);
    let run = aggview(["rewrite", "-q", p(&q), "-v", p(&v), "--mode", "count"]);
    assert_eq!(run.code, 2);
    assert!(run.stdout.is_empty());
    assert!(
        run.stderr.contains("expected a COUNT query"),
        "{}",
        run.stderr
    );
}

#[test]
fn verify_proves_r1() {
    let ws = Workspace::new();
    let q = ws.file("qpos.dl", POSITIONS_QUERY);
    let v = ws.file("vpos.dl", POSITIONS_VIEWS);
    let r = ws.file("r1.dl", "r1(J1; Z) :- v_positions_per_type(J1; Z).\n");
    let run = aggview(["verify", "-q", p(&q), "-r", p(&r), "-v", p(&v)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(
        run.stdout.starts_with("ProvedEquivalent\n"),
        "{}",
        run.stdout
    );
}

#[test]
fn verify_refutes_and_reports() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", POSITIONS_QUERY);
    let v = ws.file("v.dl", POSITIONS_VIEWS);
    let r = ws.file(
        "r2.dl",
        "r2(J1; root(2, Z1*Z2)) :- v_positions_per_type(J1; Z1), v_positions_per_type(J1; Z2).\n",
    );
    let run = aggview(["verify", "-q", p(&q), "-r", p(&r), "-v", p(&v)]);
    assert_eq!(run.code, 1);
    assert!(
        run.stdout.starts_with("RefutedByStructure\nreason: "),
        "{}",
        run.stdout
    );

    let q = ws.file(
        "qm.dl",
        "q_mediocre_sponsor(J; count) :- salaries(J, S, A), A > 200, A < 600.\n",
    );
    let v = ws.file(
        "vm.dl",
        "v_all_sponsor(J1; count) :- salaries(J1, S1, A1), A1 > 0.\n",
    );
    let r = ws.file("rm.dl", "r(J; Z) :- v_all_sponsor(J; Z).\n");
    let run = aggview([
        "verify",
        "-q",
        p(&q),
        "-r",
        p(&r),
        "-v",
        p(&v),
        "--trials",
        "50",
        "--seed",
        "3",
    ]);
    assert_eq!(run.code, 1);
    assert!(
        run.stdout
            .starts_with("RefutedByCounterexample\ncounterexample:\nsalaries("),
        "{}",
        run.stdout
    );
    let run = aggview(["verify", "-q", p(&q), "-r", p(&r), "-v", p(&v), "--json"]);
    assert_eq!(run.code, 1);
    let value = assert_valid(&run.stdout);
    assert_eq!(
        value["rewriting"]["verdict"]["kind"],
        "RefutedByCounterexample"
    );
}

#[test]
fn verify_unknown_outside_decidable_classes() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", "q(; count) :- p(X), p(Y), p(U), X < Y, X < U.\n");
    let v = ws.file(
        "v.dl",
        "v(; count) :- p(X1), p(Y1), p(U1), X1 < Y1, U1 < Y1.\n",
    );
    let r = ws.file("r.dl", "r(; Z) :- v(; Z).\n");
    let run = aggview([
        "verify",
        "-q",
        p(&q),
        "-r",
        p(&r),
        "-v",
        p(&v),
        "--trials",
        "30",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.stdout, "Unknown\nno counterexample in 30 trials\n");
    let run = aggview([
        "verify",
        "-q",
        p(&q),
        "-r",
        p(&r),
        "-v",
        p(&v),
        "--trials",
        "30",
        "--seed",
        "9",
        "--json",
    ]);
    let value = assert_valid(&run.stdout);
    assert_eq!(value["rewriting"]["verdict"]["trials"], 30);
}

#[test]
fn unfold_prints_expansion() {
    let ws = Workspace::new();
    let v = ws.file("v.dl", SALARY_VIEWS);
    let r = ws.file(
        "r.dl",
        "r(J; sum(A*Cnt)) :- v_positions_per_type(J; Cnt), v_salary_for_ta_job(J; A).\n",
    );
    let run = aggview(["unfold", "-r", p(&r), "-v", p(&v)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(
        run.stdout,
        "r_unfolded(J; sum(A_2)) :- ta(N_1, C_1, J), salaries(J, S_2, A_2).\n"
    );
}

#[test]
fn unfold_bare_product_needs_the_query() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", SALARY_QUERY);
    let v = ws.file("v.dl", SALARY_VIEWS);
    let r = ws.file(
        "r.dl",
        "r_q(J; A*Z1) :- v_positions_per_type(J; Z1), v_salary_for_ta_job(J; A).\n",
    );
    let without = aggview(["unfold", "-r", p(&r), "-v", p(&v)]);
    assert_eq!(without.code, 2);
    assert!(
        without.stderr.contains("bare product"),
        "{}",
        without.stderr
    );
    let with = aggview(["unfold", "-r", p(&r), "-v", p(&v), "-q", p(&q)]);
    assert_eq!(with.code, 0, "{}", with.stderr);
    assert!(
        with.stdout.starts_with("r_q_unfolded(J; sum("),
        "{}",
        with.stdout
    );
}

#[test]
fn translate_both_directions() {
    let ws = Workspace::new();
    let schema = ws.file("s.json", TA_SCHEMA);
    let sql = ws.file(
        "govt.sql",
        "SELECT name FROM ta, salaries WHERE sponsorship = 'Govt.' AND amount > 500 \
         AND ta.job_type = salaries.job_type",
    );
    let run = aggview([
        "translate",
        "--from",
        "sql",
        "--schema",
        p(&schema),
        "--name",
        "q_govt",
        p(&sql),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(
        run.stdout,
        "q_govt(N) :- ta(N, C, J), salaries(J, 'Govt.', A), 500 < A.\n"
    );

    let dl = ws.file("q.dl", SALARY_QUERY);
    let run = aggview([
        "translate",
        "--from",
        "datalog",
        "--schema",
        p(&schema),
        p(&dl),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(
        run.stdout,
        "SELECT t1.job_type, SUM(t2.amount)\nFROM ta t1, salaries t2\nWHERE t1.job_type = t2.job_type\nGROUP BY t1.job_type\n"
    );
    let bad = ws.file("bad.sql", "SELECT name FROM ta HAVING COUNT(*) > 1");
    let run = aggview([
        "translate",
        "--from",
        "sql",
        "--schema",
        p(&schema),
        p(&bad),
    ]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("unsupported SQL"), "{}", run.stderr);
}

#[test]
fn eval_with_and_without_views() {
    let ws = Workspace::new();
    let db = ws.file(
        "db.json",
        r#"{"ta": [["ann", "db", "lab"], ["bob", "db", "lab"], ["cy", "os", "grader"]],
            "salaries": [["lab", "univ", 600], ["lab", "govt", 400], ["grader", "univ", 300]]}"#,
    );
    let q = ws.file("q.dl", SALARY_QUERY);
    let run = aggview(["eval", "-q", p(&q), "-d", p(&db)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.stdout, "q(grader, 300).\nq(lab, 2000).\n");

    let v = ws.file("v.dl", SALARY_VIEWS);
    let r = ws.file(
        "r.dl",
        "r(J; A*Z) :- v_positions_per_type(J; Z), v_salary_for_ta_job(J; A).\n",
    );
    let run = aggview(["eval", "-q", p(&r), "-d", p(&db), "-v", p(&v)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.stdout, "r(grader, 300).\nr(lab, 2000).\n");
    let run = aggview(["eval", "-q", p(&r), "-d", p(&db)]);
    assert_eq!(run.code, 2);

    let over_views = ws.file("qv.dl", "w(J; sum(A)) :- v_salary_for_ta_job(J; A).\n");
    let run = aggview([
        "eval",
        "-q",
        p(&over_views),
        "-d",
        p(&db),
        "-v",
        p(&v),
        "--json",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let value = assert_valid(&run.stdout);
    assert_eq!(
        value["answer"]["w"],
        serde_json::json!([["grader", 300], ["lab", 1000]])
    );
}

#[test]
fn closure_output() {
    let run = aggview(["closure", "-c", "X<Y, Y<2, U<W, W<2"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let items: Vec<&str> = run.stdout.trim_end().split(", ").collect();
    assert!(
        items.contains(&"X < 2") && items.contains(&"U < 2"),
        "{}",
        run.stdout
    );
    let run = aggview(["closure", "-c", "X < Y, Y <= X"]);
    assert_eq!(run.code, 1);
    assert_eq!(run.stdout, "inconsistent\n");
}

#[test]
fn usage_and_input_errors_exit_2() {
    let ws = Workspace::new();
    let q = ws.file("q.dl", SALARY_QUERY);
    let run = aggview(["rewrite", "-q", p(&q), "--frobnicate"]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("Usage:"), "{}", run.stderr);
    let run = aggview(["nonsense"]);
    assert_eq!(run.code, 2);
    let run = aggview([
        "rewrite",
        "-q",
        "/nonexistent/q.dl",
        "-v",
        "/nonexistent/v.dl",
    ]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("cannot read"), "{}", run.stderr);
    let broken = ws.file("broken.dl", "q(X; count) :- p(X,\n");
    let run = aggview(["rewrite", "-q", p(&broken), "-v", p(&q)]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("syntax error"), "{}", run.stderr);
    let run = aggview(["closure", "-c", "X <"]);
    assert_eq!(run.code, 2);
}

#[test]
fn output_is_deterministic() {
    let ws = Workspace::new();
    let q = ws.file(
        "q.dl",
        "q_mediocre_sponsor(J; count) :- salaries(J, S, A), A > 200, A < 600.\n",
    );
    let v = ws.file(
        "v.dl",
        "v_all_sponsor(J1; count) :- salaries(J1, S1, A1), A1 > 0.\n",
    );
    let r = ws.file("r.dl", "r(J; Z) :- v_all_sponsor(J; Z).\n");
    let args = [
        "verify",
        "-q",
        p(&q),
        "-r",
        p(&r),
        "-v",
        p(&v),
        "--seed",
        "42",
        "--json",
    ];
    let a = aggview(args);
    let b = aggview(args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.code, b.code);
}
