use std::fmt;

use crate::model::{
    format_rational, AggregateQuery, AggregateTerm, Atom, Comparison, HeadExpr, Rewriting, Term,
    ViewAtom,
};

const KEYWORDS: [&str; 5] = ["view", "count", "sum", "max", "min"];

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Num(n) => f.write_str(&format_rational(n)),
            Term::Str(s) if is_plain_ident(s) => f.write_str(s),
            Term::Str(s) => {
                f.write_str("'")?;
                for c in s.chars() {
                    if c == '\'' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("'")
            }
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, join(&self.args, ", "))
    }
}

impl fmt::Display for AggregateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregateTerm::Count => f.write_str("count"),
            AggregateTerm::Sum(y) => write!(f, "sum({y})"),
            AggregateTerm::Max(y) => write!(f, "max({y})"),
            AggregateTerm::Min(y) => write!(f, "min({y})"),
        }
    }
}

fn head(
    f: &mut fmt::Formatter<'_>,
    name: &str,
    grouping: &[String],
    agg: Option<String>,
) -> fmt::Result {
    write!(f, "{}({}", name, grouping.join(", "))?;
    if let Some(agg) = agg {
        write!(f, "; {agg}")?;
    }
    f.write_str(")")
}

fn body(f: &mut fmt::Formatter<'_>, items: Vec<String>) -> fmt::Result {
    if !items.is_empty() {
        write!(f, " :- {}", items.join(", "))?;
    }
    f.write_str(".")
}

impl fmt::Display for AggregateQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        head(
            f,
            &self.name,
            &self.grouping,
            self.agg.as_ref().map(ToString::to_string),
        )?;
        let items = self
            .atoms
            .iter()
            .map(ToString::to_string)
            .chain(self.comparisons.iter().map(ToString::to_string))
            .collect();
        body(f, items)
    }
}

impl fmt::Display for ViewAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.view, join(&self.args, ", "))?;
        if let Some(z) = &self.output {
            write!(f, "; {z}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for HeadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadExpr::Sum(factors) if factors.is_empty() => f.write_str("count"),
            HeadExpr::Sum(factors) => write!(f, "sum({})", factors.join("*")),
            HeadExpr::Extremum(e, y) => write!(f, "{}({y})", e.keyword()),
            HeadExpr::Product { factors, .. } => f.write_str(&factors.join("*")),
            HeadExpr::Root { degree, factors } => {
                write!(f, "root({degree}, {})", factors.join("*"))
            }
        }
    }
}

impl fmt::Display for Rewriting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        head(f, &self.name, &self.grouping, Some(self.head.to_string()))?;
        let items = self
            .view_atoms
            .iter()
            .map(ToString::to_string)
            .chain(self.base_atoms.iter().map(ToString::to_string))
            .chain(self.comparisons.iter().map(ToString::to_string))
            .collect();
        body(f, items)
    }
}

/// Renders a view definition with its `view` keyword.
pub fn render_view(view: &AggregateQuery) -> String {
    format!("view {view}")
}
