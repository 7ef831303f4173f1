//! `aggview`: rewrite, verify and inspect aggregate queries over views.
//!
//! Exit status: 0 on success, 1 when no rewriting is found or a rewriting
//! is refuted, 2 on usage or input errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggview::{
    datalog_to_sql, deductive_closure, eval_aggregate, eval_rewriting, extend_database,
    parse_comparisons, parse_query, parse_rewriting, parse_schema, parse_views, rewrite,
    rewriting_to_json, sql_text_to_datalog, unfold, unfold_as, verify_rewriting_with, AggKind,
    ConstraintSet, Database, Options, ViewSet,
};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "aggview",
    version,
    about = "Rewrite aggregate queries using materialized views"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Auto,
    Count,
    Sum,
    Max,
    Min,
}

impl Mode {
    fn kind(self) -> Option<AggKind> {
        match self {
            Mode::Auto => None,
            Mode::Count => Some(AggKind::Count),
            Mode::Sum => Some(AggKind::Sum),
            Mode::Max => Some(AggKind::Max),
            Mode::Min => Some(AggKind::Min),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Language {
    Sql,
    Datalog,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for rewritings of a query using views.
    Rewrite {
        #[arg(short, long, value_name = "Q.dl")]
        query: PathBuf,
        #[arg(short, long, value_name = "V.dl")]
        views: PathBuf,
        /// Algorithm to run; `auto` follows the query's aggregate.
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        /// Report every rewriting instead of the first.
        #[arg(long)]
        all: bool,
        /// Allow rewritings that keep some base relations.
        #[arg(long)]
        partial: bool,
        /// Do not close the query's comparisons before searching.
        #[arg(long)]
        no_close: bool,
        #[arg(long)]
        json: bool,
    },
    /// Check a rewriting against a query.
    Verify {
        #[arg(short, long, value_name = "Q.dl")]
        query: PathBuf,
        #[arg(short, long, value_name = "R.dl")]
        rewriting: PathBuf,
        #[arg(short, long, value_name = "V.dl")]
        views: PathBuf,
        /// Random databases to try when no decision procedure applies.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Replace view atoms by view bodies.
    Unfold {
        #[arg(short, long, value_name = "R.dl")]
        rewriting: PathBuf,
        #[arg(short, long, value_name = "V.dl")]
        views: PathBuf,
        /// Query the rewriting answers; needed when the head is a bare product.
        #[arg(short, long, value_name = "Q.dl")]
        query: Option<PathBuf>,
    },
    /// Translate between SQL and Datalog.
    Translate {
        #[arg(long, value_enum)]
        from: Language,
        /// JSON object mapping each relation to its attribute names.
        #[arg(long, value_name = "S.json")]
        schema: PathBuf,
        /// Name of the Datalog query produced from SQL.
        #[arg(long, default_value = "q")]
        name: String,
        file: PathBuf,
    },
    /// Evaluate a query, or a rewriting over `--views`, on a database.
    Eval {
        #[arg(short, long, value_name = "Q.dl")]
        query: PathBuf,
        #[arg(short, long, value_name = "DB.json")]
        database: PathBuf,
        /// Materialize these views first so the query may refer to them.
        #[arg(short, long, value_name = "V.dl")]
        views: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the deductive closure of a set of comparisons.
    Closure {
        #[arg(short, long, value_name = "COMPARISONS")]
        comparisons: String,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_views(path: &Path) -> Result<ViewSet> {
    parse_views(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_query(path: &Path) -> Result<aggview::AggregateQuery> {
    parse_query(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn print_json(out: &mut dyn Write, value: &serde_json::Value) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    writeln!(out, "{text}")
}

/// Runs one command and returns its exit status.
fn run(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Rewrite {
            query,
            views,
            mode,
            all,
            partial,
            no_close,
            json,
        } => {
            let q = load_query(&query)?;
            let vs = load_views(&views)?;
            let opts = Options {
                all,
                partial,
                close_first: !no_close,
            };
            let found = rewrite(&q, &vs, mode.kind(), opts)?;
            if json {
                let kind = mode
                    .kind()
                    .or(q.kind())
                    .map(|k| k.to_string().to_lowercase());
                print_json(
                    out,
                    &json!({
                        "command": "rewrite",
                        "query": q.to_string(),
                        "mode": kind,
                        "rewritings": found.iter().map(|r| rewriting_to_json(r, None)).collect::<Vec<_>>(),
                    }),
                )?;
            } else if found.is_empty() {
                writeln!(out, "no rewriting found")?;
            } else {
                for r in &found {
                    writeln!(out, "{r}")?;
                }
            }
            Ok(if found.is_empty() { 1 } else { 0 })
        }
        Command::Verify {
            query,
            rewriting,
            views,
            trials,
            seed,
            json,
        } => {
            let q = load_query(&query)?;
            let vs = load_views(&views)?;
            let r = parse_rewriting(&read(&rewriting)?, &vs)
                .with_context(|| format!("in {}", rewriting.display()))?;
            let verdict = verify_rewriting_with(&q, &r, &vs, trials, seed)?;
            if json {
                print_json(
                    out,
                    &json!({
                        "command": "verify",
                        "query": q.to_string(),
                        "rewriting": rewriting_to_json(&r, Some(&verdict)),
                    }),
                )?;
            } else {
                writeln!(out, "{}", verdict.name())?;
                match &verdict {
                    aggview::Verdict::ProvedEquivalent(w) => writeln!(out, "witness: {w}")?,
                    aggview::Verdict::RefutedByCounterexample(d) => {
                        write!(out, "counterexample:\n{d}")?
                    }
                    aggview::Verdict::RefutedByStructure(reason) => {
                        writeln!(out, "reason: {reason}")?
                    }
                    aggview::Verdict::Unknown(n) => {
                        writeln!(out, "no counterexample in {n} trials")?
                    }
                }
            }
            Ok(if verdict.is_refuted() { 1 } else { 0 })
        }
        Command::Unfold {
            rewriting,
            views,
            query,
        } => {
            let vs = load_views(&views)?;
            let r = parse_rewriting(&read(&rewriting)?, &vs)
                .with_context(|| format!("in {}", rewriting.display()))?;
            let kind = query
                .map(|q| load_query(&q))
                .transpose()?
                .and_then(|q| q.kind());
            let u = match kind {
                Some(k) => unfold_as(&r, &vs, k)?,
                None => unfold(&r, &vs)?,
            };
            writeln!(out, "{u}")?;
            Ok(0)
        }
        Command::Translate {
            from,
            schema,
            name,
            file,
        } => {
            let schema = parse_schema(&read(&schema)?)
                .with_context(|| format!("in {}", schema.display()))?;
            let text = read(&file)?;
            match from {
                Language::Sql => writeln!(out, "{}", sql_text_to_datalog(&text, &schema, &name)?)?,
                Language::Datalog => {
                    let q = parse_query(&text).with_context(|| format!("in {}", file.display()))?;
                    writeln!(out, "{}", datalog_to_sql(&q, &schema)?)?;
                }
            }
            Ok(0)
        }
        Command::Eval {
            query,
            database,
            views,
            json,
        } => {
            let text = read(&query)?;
            let mut d = Database::from_json(&read(&database)?)
                .with_context(|| format!("in {}", database.display()))?;
            let views = views.map(|v| load_views(&v)).transpose()?;
            if let Some(vs) = &views {
                d = extend_database(&d, vs)?;
            }
            // a rewriting head (a bare product, say) only parses against views
            let (name, shown, rows) = match (parse_query(&text), &views) {
                (Ok(q), _) => (q.name.clone(), q.to_string(), eval_aggregate(&q, &d)?),
                (Err(e), Some(vs)) => match parse_rewriting(&text, vs) {
                    Ok(r) => (r.name.clone(), r.to_string(), eval_rewriting(&r, &d)?),
                    Err(_) => {
                        return Err(anyhow::Error::new(e).context(format!("in {}", query.display())))
                    }
                },
                (Err(e), None) => {
                    return Err(anyhow::Error::new(e).context(format!("in {}", query.display())))
                }
            };
            let mut answer = Database::new();
            answer.relations.insert(name.clone(), Default::default());
            for t in rows {
                answer.insert(&name, t);
            }
            if json {
                print_json(
                    out,
                    &json!({"command": "eval", "query": shown, "answer": answer.to_json()}),
                )?;
            } else {
                write!(out, "{answer}")?;
            }
            Ok(0)
        }
        Command::Closure { comparisons } => {
            let cs = ConstraintSet::from(parse_comparisons(&comparisons)?);
            match deductive_closure(&cs) {
                Ok(closed) => {
                    let items: Vec<String> = closed.iter().map(ToString::to_string).collect();
                    writeln!(out, "{}", items.join(", "))?;
                    Ok(0)
                }
                Err(aggview::Error::InconsistentInput) => {
                    writeln!(out, "inconsistent")?;
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = io::stdout().lock();
    match run(cli, &mut out).and_then(|code| Ok(out.flush().map(|_| code)?)) {
        Ok(code) => ExitCode::from(code),
        // a closed pipe (`aggview ... | head`) is not an error
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
