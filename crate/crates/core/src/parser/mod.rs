//! Parser for the extended Datalog notation.
//!
//! ```text
//! program    := (stmt '.')*
//! stmt       := ['view'] rule
//! rule       := head ':-' body | head
//! head       := IDENT '(' termlist [';' headagg] ')'
//! headagg    := 'count' | ('sum'|'max'|'min') '(' VAR ')' | 'sum' '(' prod ')' | prod
//! prod       := VAR ('*' VAR)*
//! body       := atom (',' atom)*
//! atom       := IDENT '(' termlist [';' VAR] ')' | term CMP term
//! CMP        := '<' | '<=' | '>' | '>=' | '='
//! term       := VAR | RATIONAL | "'" CHARS "'" | LIDENT
//! ```
//!
//! Variables start with an uppercase letter or `_`. Lowercase identifiers
//! and quoted strings are string constants; rationals are written `3`,
//! `-3/2` or `2.5`. `%` starts a line comment. The `; VAR` suffix of a body
//! atom names the aggregate output of a view atom inside a rewriting.
//!
//! Equalities are eliminated while parsing, `>`/`>=` are flipped, and ground
//! comparisons are evaluated.

mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use num::{BigInt, BigRational};

pub use render::render_view;

use crate::error::{Error, Result};
use crate::model::{
    AggKind, AggregateQuery, AggregateTerm, Atom, CmpOp, Comparison, Extremum, HeadExpr, Rewriting,
    Substitution, Term, ViewAtom, ViewSet,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Var(String),
    Ident(String),
    Num(BigRational),
    Str(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Dot,
    If,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Star,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Ident(i) => format!("identifier `{i}`"),
            Tok::Num(_) => "number".into(),
            Tok::Str(_) => "string".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Dot => ".",
            Tok::If => ":-",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Eq => "=",
            Tok::Star => "*",
            _ => "?",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

fn syntax(pos: Pos, message: impl Into<String>) -> Error {
    Error::Syntax {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

struct Cursor {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Cursor {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).copied()
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat_while(&mut self, keep: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek(0).filter(|&c| keep(c)) {
            s.push(c);
            self.bump();
        }
        s
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let mut cur = Cursor {
        chars: text.chars().collect(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek(0) {
        let pos = cur.pos();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '%' {
            cur.eat_while(|c| c != '\n');
            continue;
        }
        let next = cur.peek(1);
        if c.is_ascii_alphabetic() || c == '_' {
            let word = cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '_');
            let tok = if c.is_ascii_uppercase() || c == '_' {
                Tok::Var(word)
            } else {
                Tok::Ident(word)
            };
            out.push((tok, pos));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && next.is_some_and(|d| d.is_ascii_digit())) {
            let mut literal = String::new();
            if c == '-' {
                cur.bump();
                literal.push('-');
            }
            literal += &cur.eat_while(|c| c.is_ascii_digit());
            if matches!(cur.peek(0), Some('.' | '/'))
                && cur.peek(1).is_some_and(|d| d.is_ascii_digit())
            {
                literal.push(cur.bump().unwrap());
                literal += &cur.eat_while(|c| c.is_ascii_digit());
            }
            let value = parse_rational(&literal)
                .ok_or_else(|| syntax(pos, format!("bad number `{literal}`")))?;
            out.push((Tok::Num(value), pos));
            continue;
        }
        if c == '\'' {
            cur.bump();
            let mut s = String::new();
            loop {
                match cur.bump() {
                    None => return Err(syntax(pos, "unterminated string")),
                    Some('\'') => break,
                    Some('\\') => match cur.bump() {
                        Some(e) => s.push(e),
                        None => return Err(syntax(pos, "unterminated string")),
                    },
                    Some(ch) => s.push(ch),
                }
            }
            out.push((Tok::Str(s), pos));
            continue;
        }
        let (tok, len) = match (c, next) {
            (':', Some('-')) => (Tok::If, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('=', _) => (Tok::Eq, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            (',', _) => (Tok::Comma, 1),
            (';', _) => (Tok::Semi, 1),
            ('.', _) => (Tok::Dot, 1),
            ('*', _) => (Tok::Star, 1),
            _ => return Err(syntax(pos, format!("unexpected character `{c}`"))),
        };
        for _ in 0..len {
            cur.bump();
        }
        out.push((tok, pos));
    }
    out.push((Tok::Eof, cur.pos()));
    Ok(out)
}

/// Parses `3`, `-3/2` or `2.5` into an exact rational.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = BigInt::from_str(n).ok()?;
        let d = BigInt::from_str(d).ok()?;
        if d == BigInt::from(0) {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let whole = BigInt::from_str(if int == "-" || int.is_empty() {
            "0"
        } else {
            int
        })
        .ok()?;
        let scale = num::pow(BigInt::from(10), frac.len());
        let frac = BigRational::new(BigInt::from_str(frac).ok()?, scale);
        let whole = BigRational::from_integer(whole);
        return Some(if negative { whole - frac } else { whole + frac });
    }
    BigInt::from_str(text).ok().map(BigRational::from_integer)
}

#[derive(Clone, Debug)]
enum RawAgg {
    Count,
    Sum(Vec<String>),
    Extremum(Extremum, String),
    Product(Vec<String>),
    Root(u32, Vec<String>),
}

#[derive(Clone, Debug)]
struct RawAtom {
    predicate: String,
    args: Vec<Term>,
    output: Option<Term>,
    pos: Pos,
}

#[derive(Clone, Debug)]
enum RawCmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct RawCmp {
    lhs: Term,
    op: RawCmpOp,
    rhs: Term,
    pos: Pos,
}

#[derive(Clone, Debug)]
struct RawRule {
    is_view: bool,
    name: String,
    head: Vec<(Term, Pos)>,
    agg: Option<(RawAgg, Pos)>,
    atoms: Vec<RawAtom>,
    comparisons: Vec<RawCmp>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.pos(),
                format!(
                    "expected `{}`, found {}",
                    want.symbol(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn program(&mut self) -> Result<Vec<RawRule>> {
        let mut rules = Vec::new();
        while *self.peek() != Tok::Eof {
            rules.push(self.rule()?);
            self.expect(Tok::Dot)?;
        }
        Ok(rules)
    }

    fn rule(&mut self) -> Result<RawRule> {
        let pos = self.pos();
        let is_view = matches!(self.peek(), Tok::Ident(k) if k == "view")
            && matches!(self.peek2(), Tok::Ident(_));
        if is_view {
            self.bump();
        }
        let name = match self.bump() {
            Tok::Ident(name) => name,
            other => {
                return Err(syntax(
                    pos,
                    format!("expected a rule head, found {}", other.describe()),
                ))
            }
        };
        self.expect(Tok::LParen)?;
        let mut head = Vec::new();
        if !matches!(self.peek(), Tok::RParen | Tok::Semi) {
            loop {
                let p = self.pos();
                head.push((self.term()?, p));
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        let mut agg = None;
        if *self.peek() == Tok::Semi {
            self.bump();
            let p = self.pos();
            agg = Some((self.head_agg()?, p));
        }
        self.expect(Tok::RParen)?;
        let mut rule = RawRule {
            is_view,
            name,
            head,
            agg,
            atoms: Vec::new(),
            comparisons: Vec::new(),
        };
        if *self.peek() == Tok::If {
            self.bump();
            loop {
                self.body_item(&mut rule)?;
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        Ok(rule)
    }

    fn head_agg(&mut self) -> Result<RawAgg> {
        let pos = self.pos();
        if let Tok::Ident(k) = self.peek().clone() {
            self.bump();
            match k.as_str() {
                "count" => return Ok(RawAgg::Count),
                "sum" | "max" | "min" => {
                    self.expect(Tok::LParen)?;
                    let factors = self.product()?;
                    self.expect(Tok::RParen)?;
                    return match (k.as_str(), factors.as_slice()) {
                        ("sum", _) => Ok(RawAgg::Sum(factors)),
                        ("max", [y]) => Ok(RawAgg::Extremum(Extremum::Max, y.clone())),
                        ("min", [y]) => Ok(RawAgg::Extremum(Extremum::Min, y.clone())),
                        _ => Err(syntax(pos, format!("`{k}` takes a single variable"))),
                    };
                }
                "root" => {
                    self.expect(Tok::LParen)?;
                    let p = self.pos();
                    let degree = match self.bump() {
                        Tok::Num(n) if n.is_integer() => {
                            n.to_integer().try_into().ok().filter(|d: &u32| *d >= 2)
                        }
                        _ => None,
                    }
                    .ok_or_else(|| syntax(p, "`root` takes an integer degree of at least 2"))?;
                    self.expect(Tok::Comma)?;
                    let factors = self.product()?;
                    self.expect(Tok::RParen)?;
                    return Ok(RawAgg::Root(degree, factors));
                }
                _ => return Err(syntax(pos, format!("unknown aggregate `{k}`"))),
            }
        }
        Ok(RawAgg::Product(self.product()?))
    }

    fn product(&mut self) -> Result<Vec<String>> {
        let mut factors = vec![self.var()?];
        while *self.peek() == Tok::Star {
            self.bump();
            factors.push(self.var()?);
        }
        Ok(factors)
    }

    fn var(&mut self) -> Result<String> {
        let pos = self.pos();
        match self.bump() {
            Tok::Var(v) => Ok(v),
            other => Err(syntax(
                pos,
                format!("expected a variable, found {}", other.describe()),
            )),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let pos = self.pos();
        match self.bump() {
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Ident(s) | Tok::Str(s) => Ok(Term::Str(s)),
            Tok::Num(n) => Ok(Term::Num(n)),
            other => Err(syntax(
                pos,
                format!("expected a term, found {}", other.describe()),
            )),
        }
    }

    fn body_item(&mut self, rule: &mut RawRule) -> Result<()> {
        let pos = self.pos();
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::LParen {
            let Tok::Ident(predicate) = self.bump() else {
                unreachable!()
            };
            self.bump();
            let mut args = Vec::new();
            if !matches!(self.peek(), Tok::RParen | Tok::Semi) {
                loop {
                    args.push(self.term()?);
                    if *self.peek() != Tok::Comma {
                        break;
                    }
                    self.bump();
                }
            }
            let mut output = None;
            if *self.peek() == Tok::Semi {
                self.bump();
                output = Some(Term::Var(self.var()?));
            }
            self.expect(Tok::RParen)?;
            rule.atoms.push(RawAtom {
                predicate,
                args,
                output,
                pos,
            });
            return Ok(());
        }
        let lhs = self.term()?;
        let op_pos = self.pos();
        let op = match self.bump() {
            Tok::Lt => RawCmpOp::Lt,
            Tok::Le => RawCmpOp::Le,
            Tok::Gt => RawCmpOp::Gt,
            Tok::Ge => RawCmpOp::Ge,
            Tok::Eq => RawCmpOp::Eq,
            other => {
                return Err(syntax(
                    op_pos,
                    format!("expected a comparison operator, found {}", other.describe()),
                ))
            }
        };
        let rhs = self.term()?;
        rule.comparisons.push(RawCmp { lhs, op, rhs, pos });
        Ok(())
    }
}

/// A rule after equality elimination, before it is typed as a query or a
/// rewriting.
struct Resolved {
    is_view: bool,
    name: String,
    grouping: Vec<String>,
    agg: Option<(RawAgg, Pos)>,
    atoms: Vec<RawAtom>,
    comparisons: Vec<Comparison>,
}

fn is_protected(rule: &RawRule, var: &str) -> bool {
    let in_head = rule.head.iter().any(|(t, _)| t.as_var() == Some(var));
    let in_agg = match &rule.agg {
        Some((RawAgg::Count, _)) | None => false,
        Some((RawAgg::Extremum(_, y), _)) => y == var,
        Some((RawAgg::Sum(f) | RawAgg::Product(f) | RawAgg::Root(_, f), _)) => {
            f.iter().any(|v| v == var)
        }
    };
    in_head || in_agg
}

fn first_occurrence(rule: &RawRule) -> BTreeMap<String, usize> {
    let mut order = BTreeMap::new();
    let mut note = |t: &Term| {
        if let Term::Var(v) = t {
            let n = order.len();
            order.entry(v.clone()).or_insert(n);
        }
    };
    for (t, _) in &rule.head {
        note(t);
    }
    for a in &rule.atoms {
        a.args.iter().for_each(&mut note);
        a.output.iter().for_each(&mut note);
    }
    for c in &rule.comparisons {
        note(&c.lhs);
        note(&c.rhs);
    }
    order
}

fn resolve(rule: RawRule) -> Result<Resolved> {
    for (t, p) in &rule.head {
        if !t.is_var() {
            return Err(syntax(
                *p,
                format!("head argument `{t}` must be a variable"),
            ));
        }
    }
    let order = first_occurrence(&rule);
    let rank = |v: &str| {
        (
            !is_protected(&rule, v),
            order.get(v).copied().unwrap_or(usize::MAX),
        )
    };

    // variable-variable equalities first: unify onto the preferred name
    let mut subst = Substitution::new();
    for c in rule
        .comparisons
        .iter()
        .filter(|c| matches!(c.op, RawCmpOp::Eq))
    {
        if let (Term::Var(_), Term::Var(_)) = (&c.lhs, &c.rhs) {
            let a = subst.apply_term(&c.lhs);
            let b = subst.apply_term(&c.rhs);
            let (Term::Var(a), Term::Var(b)) = (a, b) else {
                unreachable!()
            };
            if a == b {
                continue;
            }
            let (keep, drop) = if rank(&a) <= rank(&b) { (a, b) } else { (b, a) };
            let step: Substitution = [(drop, Term::Var(keep))].into_iter().collect();
            subst = subst.then(&step);
        }
    }

    // variable-constant and constant-constant equalities
    let mut extra = Vec::new();
    for c in rule
        .comparisons
        .iter()
        .filter(|c| matches!(c.op, RawCmpOp::Eq))
    {
        let a = subst.apply_term(&c.lhs);
        let b = subst.apply_term(&c.rhs);
        match (&a, &b) {
            (Term::Var(_), Term::Var(_)) => {}
            (Term::Var(v), k) | (k, Term::Var(v)) => {
                if is_protected(&rule, v) {
                    match k {
                        Term::Num(_) => {
                            extra.push(Comparison::le(k.clone(), a.clone()));
                            extra.push(Comparison::le(a.clone(), k.clone()));
                        }
                        _ => {
                            return Err(Error::TypeError(format!(
                                "head variable {v} of `{}` is equated to the string constant {k}",
                                rule.name
                            )))
                        }
                    }
                } else {
                    let step: Substitution = [(v.clone(), k.clone())].into_iter().collect();
                    subst = subst.then(&step);
                }
            }
            _ if a == b => {}
            _ => {
                return Err(Error::InconsistentGround(format!(
                    "{a} = {b} at {}:{}",
                    c.pos.line, c.pos.col
                )))
            }
        }
    }
    let subst = subst.normalized();

    let mut comparisons = Vec::new();
    for c in &rule.comparisons {
        let lhs = subst.apply_term(&c.lhs);
        let rhs = subst.apply_term(&c.rhs);
        let cmp = match c.op {
            RawCmpOp::Eq => continue,
            RawCmpOp::Lt => Comparison::lt(lhs, rhs),
            RawCmpOp::Le => Comparison::le(lhs, rhs),
            RawCmpOp::Gt => Comparison::lt(rhs, lhs),
            RawCmpOp::Ge => Comparison::le(rhs, lhs),
        };
        comparisons.push(check_comparison(cmp, c.pos)?);
    }
    for cmp in extra {
        comparisons.push(cmp);
    }
    comparisons.dedup();

    let rename = |v: &String| match subst.apply_var(v) {
        Term::Var(n) => Ok(n),
        k => Err(Error::TypeError(format!(
            "head variable {v} is fixed to the constant {k}"
        ))),
    };
    let grouping = rule
        .head
        .iter()
        .map(|(t, _)| rename(&t.as_var().unwrap().to_string()))
        .collect::<Result<Vec<_>>>()?;
    let agg = match rule.agg.clone() {
        None => None,
        Some((a, p)) => Some((
            match a {
                RawAgg::Count => RawAgg::Count,
                RawAgg::Sum(f) => RawAgg::Sum(f.iter().map(rename).collect::<Result<_>>()?),
                RawAgg::Product(f) => RawAgg::Product(f.iter().map(rename).collect::<Result<_>>()?),
                RawAgg::Extremum(e, y) => RawAgg::Extremum(e, rename(&y)?),
                RawAgg::Root(k, f) => RawAgg::Root(k, f.iter().map(rename).collect::<Result<_>>()?),
            },
            p,
        )),
    };
    let atoms = rule
        .atoms
        .iter()
        .map(|a| RawAtom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| subst.apply_term(t)).collect(),
            output: a.output.as_ref().map(|t| subst.apply_term(t)),
            pos: a.pos,
        })
        .collect();
    Ok(Resolved {
        is_view: rule.is_view,
        name: rule.name,
        grouping,
        agg,
        atoms,
        comparisons,
    })
}

fn check_comparison(c: Comparison, pos: Pos) -> Result<Comparison> {
    for t in [&c.lhs, &c.rhs] {
        if let Term::Str(s) = t {
            return Err(Error::TypeError(format!(
                "string constant '{s}' used in an order comparison at {}:{}",
                pos.line, pos.col
            )));
        }
    }
    match c.ground_value() {
        Some(false) => Err(Error::InconsistentGround(format!(
            "{c} at {}:{}",
            pos.line, pos.col
        ))),
        _ => Ok(c),
    }
}

fn to_query(r: Resolved) -> Result<AggregateQuery> {
    let agg = match r.agg {
        None => None,
        Some((RawAgg::Count, _)) => Some(AggregateTerm::Count),
        Some((RawAgg::Sum(f), p)) => match f.as_slice() {
            [y] => Some(AggregateTerm::Sum(y.clone())),
            _ => {
                return Err(syntax(
                    p,
                    "only elementary aggregate terms are allowed in queries and views",
                ))
            }
        },
        Some((RawAgg::Extremum(Extremum::Max, y), _)) => Some(AggregateTerm::Max(y)),
        Some((RawAgg::Extremum(Extremum::Min, y), _)) => Some(AggregateTerm::Min(y)),
        Some((RawAgg::Product(_) | RawAgg::Root(..), p)) => {
            return Err(syntax(
                p,
                "only elementary aggregate terms are allowed in queries and views",
            ))
        }
    };
    let mut atoms = Vec::new();
    for a in r.atoms {
        if a.output.is_some() {
            return Err(syntax(
                a.pos,
                "view output markers are only allowed in rewritings",
            ));
        }
        atoms.push(Atom::new(a.predicate, a.args));
    }
    let comparisons = r
        .comparisons
        .into_iter()
        .filter(|c| c.ground_value().is_none())
        .collect();
    AggregateQuery::new(r.name, r.grouping, agg, atoms, comparisons)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatementKind {
    Query,
    View,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub kind: StatementKind,
    pub query: AggregateQuery,
}

/// Parsed statements plus the inferred predicate arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub statements: Vec<Statement>,
    pub schema: BTreeMap<String, usize>,
}

impl Program {
    pub fn queries(&self) -> impl Iterator<Item = &AggregateQuery> {
        self.statements
            .iter()
            .filter(|s| s.kind == StatementKind::Query)
            .map(|s| &s.query)
    }

    pub fn views(&self) -> impl Iterator<Item = &AggregateQuery> {
        self.statements
            .iter()
            .filter(|s| s.kind == StatementKind::View)
            .map(|s| &s.query)
    }

    /// All `view` statements as a view set.
    pub fn view_set(&self) -> Result<ViewSet> {
        ViewSet::new(self.views().cloned().collect())
    }
}

fn note_arity(schema: &mut BTreeMap<String, usize>, predicate: &str, arity: usize) -> Result<()> {
    match schema.get(predicate) {
        Some(&n) if n != arity => Err(Error::ArityMismatch {
            predicate: predicate.to_string(),
            expected: n,
            found: arity,
        }),
        Some(_) => Ok(()),
        None => {
            schema.insert(predicate.to_string(), arity);
            Ok(())
        }
    }
}

/// Parses a whole program of queries and `view` definitions.
pub fn parse_program(text: &str) -> Result<Program> {
    let rules = Parser {
        toks: lex(text)?,
        at: 0,
    }
    .program()?;
    let mut program = Program::default();
    let mut view_names = BTreeSet::new();
    for rule in rules {
        let r = resolve(rule)?;
        let kind = if r.is_view {
            StatementKind::View
        } else {
            StatementKind::Query
        };
        let query = to_query(r)?;
        for a in &query.atoms {
            note_arity(&mut program.schema, &a.predicate, a.arity())?;
        }
        if kind == StatementKind::View {
            if !view_names.insert(query.name.clone()) {
                return Err(Error::InvalidViews(format!(
                    "view `{}` is defined twice",
                    query.name
                )));
            }
            let arity = query.grouping.len() + usize::from(query.agg.is_some());
            note_arity(&mut program.schema, &query.name, arity)?;
        }
        program.statements.push(Statement { kind, query });
    }
    Ok(program)
}

/// Parses a single query or view definition.
pub fn parse_query(text: &str) -> Result<AggregateQuery> {
    let program = parse_program(text)?;
    match program.statements.len() {
        1 => Ok(program.statements.into_iter().next().unwrap().query),
        n => Err(Error::Syntax {
            line: 1,
            col: 1,
            message: format!("expected exactly one statement, found {n}"),
        }),
    }
}

/// Parses view definitions. A `view` prefix is optional here.
pub fn parse_views(text: &str) -> Result<ViewSet> {
    let program = parse_program(text)?;
    ViewSet::new(program.statements.into_iter().map(|s| s.query).collect())
}

/// Parses a single rewriting over `views`. Body atoms whose predicate is a
/// view become view atoms; an aggregate view's output may be written after
/// `;` or as its last argument.
pub fn parse_rewriting(text: &str, views: &ViewSet) -> Result<Rewriting> {
    let mut rules = Parser {
        toks: lex(text)?,
        at: 0,
    }
    .program()?;
    if rules.len() != 1 {
        return Err(Error::Syntax {
            line: 1,
            col: 1,
            message: format!("expected exactly one rewriting, found {}", rules.len()),
        });
    }
    let r = resolve(rules.remove(0))?;
    let head = match r.agg {
        None => {
            return Err(Error::MalformedRewriting(format!(
                "`{}` has no aggregate head",
                r.name
            )))
        }
        Some((RawAgg::Count, _)) => HeadExpr::Sum(Vec::new()),
        Some((RawAgg::Sum(f), _)) => HeadExpr::Sum(f),
        Some((RawAgg::Extremum(e, y), _)) => HeadExpr::Extremum(e, y),
        Some((RawAgg::Product(f), _)) => HeadExpr::Product {
            factors: f,
            omitted: None,
        },
        Some((RawAgg::Root(degree, factors), _)) => HeadExpr::Root { degree, factors },
    };
    let mut view_atoms = Vec::new();
    let mut base_atoms = Vec::new();
    for a in r.atoms {
        if let Some(view) = views.get(&a.predicate) {
            let mut args = a.args;
            let mut output = a.output;
            if view.agg.is_some() && output.is_none() && args.len() == view.grouping.len() + 1 {
                output = args.pop();
            }
            if args.len() != view.grouping.len() {
                return Err(Error::ArityMismatch {
                    predicate: a.predicate,
                    expected: view.grouping.len(),
                    found: args.len(),
                });
            }
            let output = match (view.agg.is_some(), output) {
                (true, Some(Term::Var(z))) => Some(z),
                (false, None) => None,
                (true, Some(t)) => {
                    return Err(syntax(
                        a.pos,
                        format!("view output `{t}` must be a variable"),
                    ))
                }
                (true, None) => {
                    return Err(syntax(
                        a.pos,
                        format!("aggregate view `{}` needs an output variable", a.predicate),
                    ))
                }
                (false, Some(_)) => {
                    return Err(syntax(
                        a.pos,
                        format!("view `{}` has no aggregate output", a.predicate),
                    ))
                }
            };
            view_atoms.push(ViewAtom {
                view: a.predicate,
                args,
                output,
            });
        } else {
            if a.output.is_some() {
                return Err(Error::UnknownView(a.predicate));
            }
            if let Some(&n) = views.base_schema().get(&a.predicate) {
                if n != a.args.len() {
                    return Err(Error::ArityMismatch {
                        predicate: a.predicate,
                        expected: n,
                        found: a.args.len(),
                    });
                }
            }
            base_atoms.push(Atom::new(a.predicate, a.args));
        }
    }
    let rewriting = Rewriting {
        name: r.name,
        grouping: r.grouping,
        head,
        view_atoms,
        base_atoms,
        comparisons: r
            .comparisons
            .into_iter()
            .filter(|c| c.ground_value().is_none())
            .collect(),
        provenance: Vec::new(),
    };
    let bound = rewriting.body_vars();
    let head_vars = rewriting
        .grouping
        .iter()
        .map(String::as_str)
        .chain(rewriting.head.vars());
    let cmp_vars = rewriting.comparisons.iter().flat_map(Comparison::vars);
    for v in head_vars.chain(cmp_vars) {
        if !bound.contains(v) {
            return Err(Error::UnsafeQuery {
                query: rewriting.name.clone(),
                var: v.to_string(),
            });
        }
    }
    Ok(rewriting)
}

/// Parses a comma-separated list of comparisons such as `X<Y, Y<2`.
pub fn parse_comparisons(text: &str) -> Result<Vec<Comparison>> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let mut out = Vec::new();
    if *p.peek() == Tok::Eof {
        return Ok(out);
    }
    loop {
        let pos = p.pos();
        let lhs = p.term()?;
        let op_pos = p.pos();
        let cmps = match p.bump() {
            Tok::Lt => vec![(CmpOp::Lt, false)],
            Tok::Le => vec![(CmpOp::Le, false)],
            Tok::Gt => vec![(CmpOp::Lt, true)],
            Tok::Ge => vec![(CmpOp::Le, true)],
            Tok::Eq => vec![(CmpOp::Le, false), (CmpOp::Le, true)],
            other => {
                return Err(syntax(
                    op_pos,
                    format!("expected a comparison operator, found {}", other.describe()),
                ))
            }
        };
        let rhs = p.term()?;
        for (op, flip) in cmps {
            let c = if flip {
                Comparison::new(rhs.clone(), op, lhs.clone())
            } else {
                Comparison::new(lhs.clone(), op, rhs.clone())
            };
            if let Term::Str(s) = if c.lhs.is_var() { &c.rhs } else { &c.lhs } {
                return Err(Error::TypeError(format!(
                    "string constant '{s}' used in an order comparison at {}:{}",
                    pos.line, pos.col
                )));
            }
            out.push(c);
        }
        match p.bump() {
            Tok::Comma => continue,
            Tok::Eof | Tok::Dot => break,
            other => {
                return Err(syntax(
                    p.pos(),
                    format!("expected `,`, found {}", other.describe()),
                ))
            }
        }
    }
    Ok(out)
}

/// Kind of head a statement would need to be read as a rewriting.
pub fn head_kind(head: &HeadExpr) -> Option<AggKind> {
    match head {
        HeadExpr::Sum(f) if f.is_empty() => Some(AggKind::Count),
        HeadExpr::Sum(_) => Some(AggKind::Sum),
        HeadExpr::Extremum(e, _) => Some(e.kind()),
        HeadExpr::Product { omitted, .. } => *omitted,
        HeadExpr::Root { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Term {
        Term::var(name)
    }

    #[test]
    fn parses_govt_query_with_flipped_comparison() {
        let q = parse_query("q_govt(N) :- salaries(J, 'Govt.', A), ta(N, C, J), A > 500.").unwrap();
        assert_eq!(q.name, "q_govt");
        assert_eq!(q.grouping, vec!["N"]);
        assert_eq!(
            q.atoms,
            vec![
                Atom::new("salaries", vec![v("J"), Term::string("Govt."), v("A")]),
                Atom::new("ta", vec![v("N"), v("C"), v("J")]),
            ]
        );
        assert_eq!(q.comparisons, vec![Comparison::lt(Term::int(500), v("A"))]);
    }

    #[test]
    fn parses_count_view() {
        let p = parse_program("view v(J; count) :- ta(N,C,J).").unwrap();
        let view = p.views().next().unwrap();
        assert_eq!(view.grouping, vec!["J"]);
        assert_eq!(view.agg, Some(AggregateTerm::Count));
        assert_eq!(p.schema["v"], 2);
    }

    #[test]
    fn eliminates_variable_equality() {
        let q = parse_query("q(X) :- p(X,Y), X = Y.").unwrap();
        assert_eq!(q.atoms, vec![Atom::new("p", vec![v("X"), v("X")])]);
        assert!(q.comparisons.is_empty());
    }

    #[test]
    fn eliminates_constant_equality() {
        let q = parse_query("q(X; count) :- p(X,Y), Y = 'db', Z = 3, r(Z).").unwrap();
        assert_eq!(q.atoms[0], Atom::new("p", vec![v("X"), Term::string("db")]));
        assert_eq!(q.atoms[1], Atom::new("r", vec![Term::int(3)]));
    }

    #[test]
    fn head_variable_fixed_to_number_keeps_variable() {
        let q = parse_query("q(X) :- p(X), X = 3.").unwrap();
        assert_eq!(q.grouping, vec!["X"]);
        assert_eq!(
            q.comparisons,
            vec![
                Comparison::le(Term::int(3), v("X")),
                Comparison::le(v("X"), Term::int(3))
            ]
        );
    }

    #[test]
    fn reports_errors() {
        assert!(matches!(
            parse_query("q(X) :- p(X), 3 = 4."),
            Err(Error::InconsistentGround(_))
        ));
        assert!(matches!(
            parse_program("q(X) :- p(X). r(X) :- p(X,X)."),
            Err(Error::ArityMismatch { .. })
        ));
        assert!(matches!(
            parse_query("q(X) :- p(Y)."),
            Err(Error::UnsafeQuery { .. })
        ));
        assert!(matches!(
            parse_query("q(X) :- p(X), X < 'a'."),
            Err(Error::TypeError(_))
        ));
        assert!(matches!(
            parse_query("q(X) :- p(X), 5 < 4."),
            Err(Error::InconsistentGround(_))
        ));
        match parse_query("q(X) :-\n  p(X) q(X).") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_query("q(X; sum(X*Y)) :- p(X,Y)."),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn rationals() {
        assert_eq!(
            parse_rational("3/2"),
            Some(BigRational::new(3.into(), 2.into()))
        );
        assert_eq!(
            parse_rational("-2.5"),
            Some(BigRational::new((-5).into(), 2.into()))
        );
        assert_eq!(
            parse_rational("0.25"),
            Some(BigRational::new(1.into(), 4.into()))
        );
        assert_eq!(parse_rational("1/0"), None);
        let q = parse_query("q(X) :- p(X), X < 5/2, -1.5 <= X.").unwrap();
        assert_eq!(q.comparisons[0], Comparison::lt(v("X"), Term::ratio(5, 2)));
        assert_eq!(q.comparisons[1], Comparison::le(Term::ratio(-3, 2), v("X")));
    }

    #[test]
    fn render_round_trips() {
        let src = "q(X; sum(Y)) :- p(X, Y), 'Govt.' = 'Govt.', X <= 3, r(Y, count).";
        let q = parse_query(src).unwrap();
        let again = parse_query(&q.to_string()).unwrap();
        assert_eq!(q.normalize().unwrap(), again.normalize().unwrap());
        assert_eq!(
            q.to_string(),
            "q(X; sum(Y)) :- p(X, Y), r(Y, 'count'), X <= 3."
        );
    }

    #[test]
    fn parses_rewriting_heads() {
        let views = parse_views(
            "view v_positions_per_type(J; count) :- ta(N, C, J).\n\
             view v_salary_for_ta_job(J; sum(A)) :- salaries(J, S, A).",
        )
        .unwrap();
        let src = "r(J; A*CNT) :- v_positions_per_type(J; CNT), v_salary_for_ta_job(J; A).";
        let r = parse_rewriting(src, &views).unwrap();
        assert_eq!(r.to_string(), src);
        assert_eq!(
            r.head,
            HeadExpr::Product {
                factors: vec!["A".into(), "CNT".into()],
                omitted: None
            }
        );
        let r = parse_rewriting("r(X; sum(Y*Z1*Z2)) :- v_positions_per_type(X, Z1), v_positions_per_type(X; Z2), v_salary_for_ta_job(X; Y).", &views).unwrap();
        assert!(r.to_string().starts_with("r(X; sum(Y*Z1*Z2)) :- "));
        assert!(parse_rewriting("r(X; Z) :- v_positions_per_type(X).", &views).is_err());
    }

    #[test]
    fn parses_comparison_lists() {
        let cs = parse_comparisons("X<Y, Y<2, U>=W").unwrap();
        assert_eq!(
            cs,
            vec![
                Comparison::lt(v("X"), v("Y")),
                Comparison::lt(v("Y"), Term::int(2)),
                Comparison::le(v("W"), v("U")),
            ]
        );
    }
}
