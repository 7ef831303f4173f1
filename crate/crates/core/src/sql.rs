//! Translation between a small SQL fragment and the Datalog notation.
//!
//! The fragment is single-block `SELECT ... FROM ... [WHERE ...] [GROUP
//! BY ...]` with conjunctive conditions and at most one of `COUNT(*)`,
//! `SUM(a)`, `MAX(a)`, `MIN(a)`. Since Datalog arguments are positional,
//! a schema fixes the attribute order of every relation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, BigRational, One, Zero};
use sqlparser::ast::{
    self, BinaryOperator, Expr, FunctionArg, FunctionArgExpr, FunctionArguments, GroupByExpr,
    ObjectNamePart, SetExpr, Statement, TableFactor, UnaryOperator,
};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::Parser;

use crate::error::{Error, Result};
use crate::model::{AggKind, AggregateQuery, AggregateTerm, Atom, CmpOp, Comparison, Term};
use crate::parser::parse_rational;

/// Attribute names of each relation, in argument order.
pub type Schema = BTreeMap<String, Vec<String>>;

/// Reads a schema from JSON: `{"ta": ["name", "course_name", "job_type"]}`.
pub fn parse_schema(text: &str) -> Result<Schema> {
    let schema: Schema =
        serde_json::from_str(text).map_err(|e| Error::InvalidDatabase(format!("schema: {e}")))?;
    for (rel, attrs) in &schema {
        let distinct: BTreeSet<&String> = attrs.iter().collect();
        if distinct.len() != attrs.len() {
            return Err(Error::InvalidDatabase(format!(
                "schema: `{rel}` repeats an attribute"
            )));
        }
    }
    Ok(schema)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub attribute: String,
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{q}.{}", self.attribute),
            None => f.write_str(&self.attribute),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectItem {
    Column(ColumnRef),
    /// `COUNT(*)` has no column.
    Aggregate(AggKind, Option<ColumnRef>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FromItem {
    pub relation: String,
    pub alias: Option<String>,
}

impl FromItem {
    fn name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.relation)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Column(ColumnRef),
    Const(Term),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqlOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl SqlOp {
    fn symbol(self) -> &'static str {
        match self {
            SqlOp::Eq => "=",
            SqlOp::Lt => "<",
            SqlOp::Le => "<=",
            SqlOp::Gt => ">",
            SqlOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condition {
    pub lhs: Operand,
    pub op: SqlOp,
    pub rhs: Operand,
}

/// A query of the supported fragment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqlQuery {
    pub select: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub conditions: Vec<Condition>,
    /// `None` when the query has no GROUP BY clause.
    pub group_by: Option<Vec<ColumnRef>>,
}

fn unsupported(what: impl Into<String>) -> Error {
    Error::UnsupportedSql(what.into())
}

fn ident_name(parts: &[ObjectNamePart]) -> Result<String> {
    match parts {
        [ObjectNamePart::Identifier(i)] => Ok(i.value.clone()),
        _ => Err(unsupported(format!(
            "qualified relation name `{}`",
            parts
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(".")
        ))),
    }
}

fn column(e: &Expr) -> Option<ColumnRef> {
    match e {
        Expr::Identifier(i) => Some(ColumnRef {
            qualifier: None,
            attribute: i.value.clone(),
        }),
        Expr::CompoundIdentifier(parts) if parts.len() == 2 => Some(ColumnRef {
            qualifier: Some(parts[0].value.clone()),
            attribute: parts[1].value.clone(),
        }),
        Expr::Nested(inner) => column(inner),
        _ => None,
    }
}

fn number(e: &Expr) -> Option<BigRational> {
    match e {
        Expr::Value(v) => match &v.value {
            ast::Value::Number(n, _) => parse_rational(n),
            _ => None,
        },
        Expr::UnaryOp {
            op: UnaryOperator::Minus,
            expr,
        } => number(expr).map(|n| -n),
        Expr::UnaryOp {
            op: UnaryOperator::Plus,
            expr,
        } => number(expr),
        Expr::BinaryOp {
            left,
            op: BinaryOperator::Divide,
            right,
        } => {
            let (n, d) = (number(left)?, number(right)?);
            (!d.is_zero()).then(|| n / d)
        }
        Expr::Nested(inner) => number(inner),
        _ => None,
    }
}

fn operand(e: &Expr) -> Result<Operand> {
    if let Some(c) = column(e) {
        return Ok(Operand::Column(c));
    }
    if let Some(n) = number(e) {
        return Ok(Operand::Const(Term::Num(n)));
    }
    if let Expr::Value(v) = e {
        if let ast::Value::SingleQuotedString(s) = &v.value {
            return Ok(Operand::Const(Term::Str(s.clone())));
        }
    }
    Err(unsupported(format!("expression `{e}`")))
}

fn conjuncts(e: &Expr, out: &mut Vec<Condition>) -> Result<()> {
    match e {
        Expr::BinaryOp {
            left,
            op: BinaryOperator::And,
            right,
        } => {
            conjuncts(left, out)?;
            conjuncts(right, out)
        }
        Expr::Nested(inner)
            if matches!(
                **inner,
                Expr::BinaryOp {
                    op: BinaryOperator::And,
                    ..
                }
            ) =>
        {
            conjuncts(inner, out)
        }
        Expr::BinaryOp { left, op, right } => {
            let op = match op {
                BinaryOperator::Eq => SqlOp::Eq,
                BinaryOperator::Lt => SqlOp::Lt,
                BinaryOperator::LtEq => SqlOp::Le,
                BinaryOperator::Gt => SqlOp::Gt,
                BinaryOperator::GtEq => SqlOp::Ge,
                other => return Err(unsupported(format!("operator `{other}`"))),
            };
            out.push(Condition {
                lhs: operand(left)?,
                op,
                rhs: operand(right)?,
            });
            Ok(())
        }
        other => Err(unsupported(format!("condition `{other}`"))),
    }
}

fn select_item(e: &Expr) -> Result<SelectItem> {
    if let Some(c) = column(e) {
        return Ok(SelectItem::Column(c));
    }
    let Expr::Function(f) = e else {
        return Err(unsupported(format!("select item `{e}`")));
    };
    let name = ident_name(&f.name.0)?.to_ascii_lowercase();
    let kind = match name.as_str() {
        "count" => AggKind::Count,
        "sum" => AggKind::Sum,
        "max" => AggKind::Max,
        "min" => AggKind::Min,
        _ => return Err(unsupported(format!("function `{name}`"))),
    };
    let FunctionArguments::List(list) = &f.args else {
        return Err(unsupported(format!("call `{e}`")));
    };
    if list.duplicate_treatment.is_some()
        || !list.clauses.is_empty()
        || f.filter.is_some()
        || f.over.is_some()
    {
        return Err(unsupported(format!("aggregate modifiers in `{e}`")));
    }
    match list.args.as_slice() {
        [FunctionArg::Unnamed(FunctionArgExpr::Wildcard)] if kind == AggKind::Count => {
            Ok(SelectItem::Aggregate(kind, None))
        }
        [FunctionArg::Unnamed(FunctionArgExpr::Expr(arg))] => match column(arg) {
            // without NULLs COUNT(a) counts the same rows as COUNT(*)
            Some(_) if kind == AggKind::Count => Ok(SelectItem::Aggregate(kind, None)),
            Some(c) => Ok(SelectItem::Aggregate(kind, Some(c))),
            None => Err(unsupported(format!("aggregate over expression in `{e}`"))),
        },
        _ => Err(unsupported(format!("aggregate arguments in `{e}`"))),
    }
}

impl SqlQuery {
    /// Parses one SQL statement of the supported fragment.
    pub fn parse(text: &str) -> Result<SqlQuery> {
        let statements = Parser::parse_sql(&GenericDialect {}, text)
            .map_err(|e| unsupported(format!("parse error: {e}")))?;
        let [Statement::Query(query)] = statements.as_slice() else {
            return Err(unsupported("expected exactly one SELECT statement"));
        };
        if query.with.is_some()
            || query.order_by.is_some()
            || query.limit_clause.is_some()
            || query.fetch.is_some()
        {
            return Err(unsupported("WITH, ORDER BY, LIMIT and FETCH"));
        }
        let select = match query.body.as_ref() {
            SetExpr::Select(s) => s,
            SetExpr::SetOperation { .. } => return Err(unsupported("UNION, INTERSECT and EXCEPT")),
            _ => return Err(unsupported("nested queries")),
        };
        if select.distinct.is_some() {
            return Err(unsupported("DISTINCT"));
        }
        if select.having.is_some() {
            return Err(unsupported("HAVING"));
        }
        let mut items = Vec::new();
        for item in &select.projection {
            match item {
                ast::SelectItem::UnnamedExpr(e)
                | ast::SelectItem::ExprWithAlias { expr: e, .. } => items.push(select_item(e)?),
                other => return Err(unsupported(format!("select item `{other}`"))),
            }
        }
        if items
            .iter()
            .filter(|i| matches!(i, SelectItem::Aggregate(..)))
            .count()
            > 1
        {
            return Err(unsupported("more than one aggregate"));
        }
        let mut from = Vec::new();
        for t in &select.from {
            if !t.joins.is_empty() {
                return Err(unsupported(
                    "JOIN syntax; list relations in FROM and join in WHERE",
                ));
            }
            match &t.relation {
                TableFactor::Table {
                    name,
                    alias,
                    args: None,
                    ..
                } => from.push(FromItem {
                    relation: ident_name(&name.0)?,
                    alias: alias.as_ref().map(|a| a.name.value.clone()),
                }),
                TableFactor::Derived { .. } => return Err(unsupported("nested queries")),
                other => return Err(unsupported(format!("FROM item `{other}`"))),
            }
        }
        if from.is_empty() {
            return Err(unsupported("SELECT without FROM"));
        }
        let mut conditions = Vec::new();
        if let Some(w) = &select.selection {
            conjuncts(w, &mut conditions)?;
        }
        let group_by = match &select.group_by {
            GroupByExpr::Expressions(exprs, modifiers) if modifiers.is_empty() => {
                if exprs.is_empty() {
                    None
                } else {
                    Some(
                        exprs
                            .iter()
                            .map(|e| {
                                column(e).ok_or_else(|| unsupported(format!("GROUP BY `{e}`")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
            }
            _ => return Err(unsupported("GROUP BY modifiers")),
        };
        Ok(SqlQuery {
            select: items,
            from,
            conditions,
            group_by,
        })
    }
}

fn sql_number(n: &BigRational) -> String {
    let mut d = n.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut digits = 0usize;
    while (&d % &two).is_zero() || (&d % &five).is_zero() {
        if (&d % &two).is_zero() {
            d /= &two;
        }
        if (&d % &five).is_zero() {
            d /= &five;
        }
        digits += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", n.numer(), n.denom());
    }
    if digits == 0 {
        return n.numer().to_string();
    }
    let scale = num::pow(BigInt::from(10), digits);
    let scaled = (n * BigRational::from_integer(scale.clone())).to_integer();
    let sign = if scaled < BigInt::zero() { "-" } else { "" };
    let abs = if scaled < BigInt::zero() {
        -scaled
    } else {
        scaled
    };
    let whole = &abs / &scale;
    let frac = format!("{:0>width$}", (&abs % &scale).to_string(), width = digits);
    format!("{sign}{whole}.{frac}")
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => c.fmt(f),
            Operand::Const(Term::Num(n)) => f.write_str(&sql_number(n)),
            Operand::Const(Term::Str(s)) => write!(f, "'{}'", s.replace('\'', "''")),
            Operand::Const(Term::Var(v)) => f.write_str(v),
        }
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .select
            .iter()
            .map(|i| match i {
                SelectItem::Column(c) => c.to_string(),
                SelectItem::Aggregate(k, None) => format!("{k}(*)"),
                SelectItem::Aggregate(k, Some(c)) => format!("{k}({c})"),
            })
            .collect();
        write!(f, "SELECT {}", items.join(", "))?;
        let from: Vec<String> = self
            .from
            .iter()
            .map(|t| match &t.alias {
                Some(a) => format!("{} {a}", t.relation),
                None => t.relation.clone(),
            })
            .collect();
        write!(f, "\nFROM {}", from.join(", "))?;
        if !self.conditions.is_empty() {
            let conds: Vec<String> = self
                .conditions
                .iter()
                .map(|c| format!("{} {} {}", c.lhs, c.op.symbol(), c.rhs))
                .collect();
            write!(f, "\nWHERE {}", conds.join(" AND "))?;
        }
        if let Some(g) = &self.group_by {
            if !g.is_empty() {
                let cols: Vec<String> = g.iter().map(ToString::to_string).collect();
                write!(f, "\nGROUP BY {}", cols.join(", "))?;
            }
        }
        Ok(())
    }
}

/// Union-find over argument slots `(occurrence, position)` and constants.
struct Slots {
    parent: Vec<usize>,
    constant: Vec<Option<Term>>,
}

impl Slots {
    fn find(&mut self, i: usize) -> usize {
        let p = self.parent[i];
        if p == i {
            return i;
        }
        let root = self.find(p);
        self.parent[i] = root;
        root
    }

    fn union(&mut self, a: usize, b: usize) -> Result<()> {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return Ok(());
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let merged = match (self.constant[lo].take(), self.constant[hi].take()) {
            (Some(x), Some(y)) if x != y => {
                return Err(Error::InconsistentGround(format!("{x} = {y}")));
            }
            (x, y) => x.or(y),
        };
        self.parent[hi] = lo;
        self.constant[lo] = merged;
        Ok(())
    }

    fn bind(&mut self, a: usize, c: Term) -> Result<()> {
        let a = self.find(a);
        match &self.constant[a] {
            Some(x) if *x != c => Err(Error::InconsistentGround(format!("{x} = {c}"))),
            _ => {
                self.constant[a] = Some(c);
                Ok(())
            }
        }
    }
}

struct Resolver<'a> {
    sql: &'a SqlQuery,
    schema: &'a Schema,
    offsets: Vec<usize>,
}

impl Resolver<'_> {
    fn slot(&self, c: &ColumnRef) -> Result<usize> {
        let matches: Vec<usize> = self
            .sql
            .from
            .iter()
            .enumerate()
            .filter(|(_, t)| c.qualifier.as_deref().is_none_or(|q| q == t.name()))
            .filter_map(|(i, t)| {
                let attrs = &self.schema[&t.relation];
                attrs
                    .iter()
                    .position(|a| *a == c.attribute)
                    .map(|p| self.offsets[i] + p)
            })
            .collect();
        match matches.as_slice() {
            [s] => Ok(*s),
            [] => Err(Error::UnknownAttribute(c.to_string())),
            _ => Err(unsupported(format!("ambiguous attribute `{c}`"))),
        }
    }
}

fn flip(op: SqlOp) -> SqlOp {
    match op {
        SqlOp::Lt => SqlOp::Gt,
        SqlOp::Le => SqlOp::Ge,
        SqlOp::Gt => SqlOp::Lt,
        SqlOp::Ge => SqlOp::Le,
        SqlOp::Eq => SqlOp::Eq,
    }
}

/// Translates `sql` to a Datalog query named `name`: one atom per FROM
/// occurrence, equalities folded into shared variables or constants, other
/// conditions kept as comparisons. Variables are named after the
/// attribute's first letter.
pub fn sql_to_datalog(sql: &SqlQuery, schema: &Schema, name: &str) -> Result<AggregateQuery> {
    let mut offsets = Vec::new();
    let mut total = 0;
    let mut seen_names = BTreeSet::new();
    for t in &sql.from {
        let attrs = schema
            .get(&t.relation)
            .ok_or_else(|| Error::UnknownPredicate(t.relation.clone()))?;
        if !seen_names.insert(t.name()) {
            return Err(unsupported(format!(
                "`{}` occurs twice in FROM without distinct aliases",
                t.name()
            )));
        }
        offsets.push(total);
        total += attrs.len();
    }
    let res = Resolver {
        sql,
        schema,
        offsets,
    };
    let mut slots = Slots {
        parent: (0..total).collect(),
        constant: vec![None; total],
    };
    let mut pending = Vec::new();
    for c in &sql.conditions {
        match (&c.lhs, c.op, &c.rhs) {
            (Operand::Column(a), SqlOp::Eq, Operand::Column(b)) => {
                slots.union(res.slot(a)?, res.slot(b)?)?
            }
            (Operand::Column(a), SqlOp::Eq, Operand::Const(k))
            | (Operand::Const(k), SqlOp::Eq, Operand::Column(a)) => {
                slots.bind(res.slot(a)?, k.clone())?
            }
            (Operand::Const(x), SqlOp::Eq, Operand::Const(y)) => {
                if x != y {
                    return Err(Error::InconsistentGround(format!("{x} = {y}")));
                }
            }
            _ => pending.push(c),
        }
    }

    // grouping and aggregate
    let mut grouping_slots = Vec::new();
    let mut agg: Option<(AggKind, Option<usize>)> = None;
    for item in &sql.select {
        match item {
            SelectItem::Column(c) => grouping_slots.push((c, res.slot(c)?)),
            SelectItem::Aggregate(k, c) => {
                agg = Some((*k, c.as_ref().map(|c| res.slot(c)).transpose()?))
            }
        }
    }
    // an aggregate without GROUP BY groups by the selected attributes
    if let Some(g) = &sql.group_by {
        let by: BTreeSet<usize> = g
            .iter()
            .map(|c| res.slot(c).map(|s| slots.find(s)))
            .collect::<Result<_>>()?;
        let selected: BTreeSet<usize> =
            grouping_slots.iter().map(|(_, s)| slots.find(*s)).collect();
        if by != selected {
            return Err(Error::GroupByMismatch(format!(
                "SELECT lists {} but GROUP BY lists {}",
                grouping_slots
                    .iter()
                    .map(|(c, _)| c.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
                g.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        if agg.is_none() {
            return Err(unsupported("GROUP BY without an aggregate"));
        }
    }

    // variable names
    let mut names: BTreeMap<usize, Term> = BTreeMap::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    for (i, t) in sql.from.iter().enumerate() {
        for (p, attr) in schema[&t.relation].iter().enumerate() {
            let root = slots.find(res.offsets[i] + p);
            if names.contains_key(&root) {
                continue;
            }
            let term = match &slots.constant[root] {
                Some(k) => k.clone(),
                None => {
                    let initial: String = attr
                        .chars()
                        .find(|c| c.is_ascii_alphabetic())
                        .map(|c| c.to_ascii_uppercase().to_string())
                        .unwrap_or_else(|| "X".into());
                    let mut name = initial.clone();
                    let mut k = 1;
                    while used.contains(&name) {
                        name = format!("{initial}{k}");
                        k += 1;
                    }
                    used.insert(name.clone());
                    Term::Var(name)
                }
            };
            names.insert(root, term);
        }
    }
    let mut term_of = |s: usize| names[&slots.find(s)].clone();

    let atoms: Vec<Atom> = sql
        .from
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let n = schema[&t.relation].len();
            Atom::new(
                t.relation.clone(),
                (0..n).map(|p| term_of(res.offsets[i] + p)).collect(),
            )
        })
        .collect();
    let mut comparisons = Vec::new();
    for c in pending {
        let side = |o: &Operand, term_of: &mut dyn FnMut(usize) -> Term| -> Result<Term> {
            match o {
                Operand::Column(col) => Ok(term_of(res.slot(col)?)),
                Operand::Const(k) => Ok(k.clone()),
            }
        };
        let l = side(&c.lhs, &mut term_of)?;
        let r = side(&c.rhs, &mut term_of)?;
        if matches!(l, Term::Str(_)) || matches!(r, Term::Str(_)) {
            return Err(Error::TypeError(format!(
                "order comparison on a string in `{} {} {}`",
                c.lhs,
                c.op.symbol(),
                c.rhs
            )));
        }
        let (l, op, r) = match c.op {
            SqlOp::Gt | SqlOp::Ge => (r, flip(c.op), l),
            op => (l, op, r),
        };
        let op = if op == SqlOp::Lt {
            CmpOp::Lt
        } else {
            CmpOp::Le
        };
        let cmp = Comparison::new(l, op, r);
        match cmp.ground_value() {
            Some(false) => return Err(Error::InconsistentGround(cmp.to_string())),
            Some(true) => {}
            None => comparisons.push(cmp),
        }
    }
    let var_of = |t: Term, what: &str| match t {
        Term::Var(v) => Ok(v),
        other => Err(unsupported(format!(
            "{what} is fixed to the constant {other}"
        ))),
    };
    let mut grouping = Vec::new();
    for (c, s) in &grouping_slots {
        grouping.push(var_of(term_of(*s), &format!("selected attribute {c}"))?);
    }
    let agg = match agg {
        None => None,
        Some((AggKind::Count, _)) => Some(AggregateTerm::Count),
        Some((k, Some(s))) => {
            let y = var_of(term_of(s), "the aggregated attribute")?;
            Some(match k {
                AggKind::Sum => AggregateTerm::Sum(y),
                AggKind::Max => AggregateTerm::Max(y),
                _ => AggregateTerm::Min(y),
            })
        }
        Some((k, None)) => return Err(unsupported(format!("{k}(*)"))),
    };
    AggregateQuery::new(name, grouping, agg, atoms, comparisons)
}

/// Parses SQL text and translates it.
pub fn sql_text_to_datalog(text: &str, schema: &Schema, name: &str) -> Result<AggregateQuery> {
    sql_to_datalog(&SqlQuery::parse(text)?, schema, name)
}

/// Translates a Datalog query over schema relations to SQL. Body atoms
/// become FROM items aliased `t1, t2, ...`; each variable is read from its
/// first occurrence and later occurrences become equality conditions.
pub fn datalog_to_sql(q: &AggregateQuery, schema: &Schema) -> Result<SqlQuery> {
    let mut from = Vec::new();
    let mut first: BTreeMap<&str, ColumnRef> = BTreeMap::new();
    let mut conditions = Vec::new();
    for (i, a) in q.atoms.iter().enumerate() {
        let attrs = schema
            .get(&a.predicate)
            .ok_or_else(|| Error::UnknownPredicate(a.predicate.clone()))?;
        if attrs.len() != a.arity() {
            return Err(Error::ArityMismatch {
                predicate: a.predicate.clone(),
                expected: attrs.len(),
                found: a.arity(),
            });
        }
        let alias = format!("t{}", i + 1);
        for (t, attr) in a.args.iter().zip(attrs) {
            let col = ColumnRef {
                qualifier: Some(alias.clone()),
                attribute: attr.clone(),
            };
            match t {
                Term::Var(v) => match first.get(v.as_str()) {
                    Some(prev) => conditions.push(Condition {
                        lhs: Operand::Column(prev.clone()),
                        op: SqlOp::Eq,
                        rhs: Operand::Column(col),
                    }),
                    None => {
                        first.insert(v, col);
                    }
                },
                k => conditions.push(Condition {
                    lhs: Operand::Column(col),
                    op: SqlOp::Eq,
                    rhs: Operand::Const(k.clone()),
                }),
            }
        }
        from.push(FromItem {
            relation: a.predicate.clone(),
            alias: Some(alias),
        });
    }
    let side = |t: &Term| match t {
        Term::Var(v) => Operand::Column(first[v.as_str()].clone()),
        k => Operand::Const(k.clone()),
    };
    for c in &q.comparisons {
        conditions.push(Condition {
            lhs: side(&c.lhs),
            op: if c.op == CmpOp::Lt {
                SqlOp::Lt
            } else {
                SqlOp::Le
            },
            rhs: side(&c.rhs),
        });
    }
    let group: Vec<ColumnRef> = q
        .grouping
        .iter()
        .map(|g| first[g.as_str()].clone())
        .collect();
    let mut select: Vec<SelectItem> = group.iter().cloned().map(SelectItem::Column).collect();
    if let Some(agg) = &q.agg {
        select.push(SelectItem::Aggregate(
            agg.kind(),
            agg.var().map(|y| first[y].clone()),
        ));
    }
    let group_by = (q.agg.is_some() && !group.is_empty()).then_some(group);
    Ok(SqlQuery {
        select,
        from,
        conditions,
        group_by,
    })
}
