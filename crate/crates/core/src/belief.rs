//! Ground-predicate belief bases with typed-variable unification queries.
//!
//! A [`BeliefBase`] is an insertion-ordered set of ground [`Predicate`]s. Queries
//! take a pattern that may carry typed variables (`string A`, `int N`) and
//! return one [`Substitution`] per matching belief, in insertion order.
//!
//! The line form used for transcripts is `functor(arg1,arg2,...)` with text
//! arguments double-quoted and integers bare. [`Predicate::parse`] reads that
//! form back and also accepts variable declarations, so patterns can be
//! written the same way: `on(string A, "table")`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("belief is not ground: {0}")]
    NonGroundBelief(String),
    #[error("malformed predicate: {0}")]
    Malformed(String),
    #[error("predicate parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

/// A ground argument value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Int(_) => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Text(_) => None,
        }
    }

    pub fn var_type(&self) -> VarType {
        match self {
            Value::Text(_) => VarType::Text,
            Value::Int(_) => VarType::Int,
        }
    }

    /// Text used when a value is spliced into a prompt: raw text, decimal ints.
    pub fn to_plain(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => write_quoted(f, s),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Declared type of a query variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarType {
    Text,
    Int,
}

impl VarType {
    fn keyword(self) -> &'static str {
        match self {
            VarType::Text => "string",
            VarType::Int => "int",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Ground(Value),
    Var { name: String, ty: VarType },
}

impl Term {
    pub fn text(s: impl Into<String>) -> Self {
        Term::Ground(Value::Text(s.into()))
    }

    pub fn int(i: i64) -> Self {
        Term::Ground(Value::Int(i))
    }

    pub fn text_var(name: impl Into<String>) -> Self {
        Term::Var { name: name.into(), ty: VarType::Text }
    }

    pub fn int_var(name: impl Into<String>) -> Self {
        Term::Var { name: name.into(), ty: VarType::Int }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Ground(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Ground(v) => write!(f, "{v}"),
            Term::Var { name, ty } => write!(f, "{} {name}", ty.keyword()),
        }
    }
}

/// A logical atom: functor plus ordered arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    functor: String,
    args: Vec<Term>,
}

impl Predicate {
    pub fn new(functor: impl Into<String>, args: Vec<Term>) -> Result<Self, BeliefError> {
        let functor = functor.into();
        if functor.is_empty() {
            return Err(BeliefError::Malformed("empty functor".into()));
        }
        for arg in &args {
            if let Term::Var { name, .. } = arg {
                if name.is_empty() {
                    return Err(BeliefError::Malformed(format!(
                        "empty variable name in {functor}"
                    )));
                }
            }
        }
        Ok(Predicate { functor, args })
    }

    /// Builds a ground predicate from values.
    pub fn ground<V: Into<Value>>(
        functor: impl Into<String>,
        values: impl IntoIterator<Item = V>,
    ) -> Result<Self, BeliefError> {
        let args = values.into_iter().map(|v| Term::Ground(v.into())).collect();
        Predicate::new(functor, args)
    }

    /// Parses the line form, e.g. `on(string A, "table")` or `count(3)`.
    pub fn parse(src: &str) -> Result<Self, BeliefError> {
        let mut p = Parser { src, pos: 0 };
        p.skip_ws();
        let pred = p.predicate()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(pred)
    }

    pub fn functor(&self) -> &str {
        &self.functor
    }

    pub fn args(&self) -> &[Term] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    /// Variable names in first-occurrence order, without repeats.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for arg in &self.args {
            if let Term::Var { name, .. } = arg {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
        }
        out
    }

    /// Ground argument values; `None` if any argument is a variable.
    pub fn values(&self) -> Option<Vec<&Value>> {
        self.args
            .iter()
            .map(|t| match t {
                Term::Ground(v) => Some(v),
                Term::Var { .. } => None,
            })
            .collect()
    }

    pub fn value(&self, index: usize) -> Option<&Value> {
        match self.args.get(index)? {
            Term::Ground(v) => Some(v),
            Term::Var { .. } => None,
        }
    }

    /// Replaces bound variables with their values. Unbound variables stay.
    pub fn apply(&self, subst: &Substitution) -> Predicate {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Var { name, .. } => match subst.get(name) {
                    Some(v) => Term::Ground(v.clone()),
                    None => t.clone(),
                },
                g => g.clone(),
            })
            .collect();
        Predicate { functor: self.functor.clone(), args }
    }

    /// Unifies this pattern against a ground predicate.
    pub fn unify(&self, ground: &Predicate) -> Option<Substitution> {
        if self.functor != ground.functor || self.args.len() != ground.args.len() {
            return None;
        }
        let mut subst = Substitution::new();
        for (pat, arg) in self.args.iter().zip(&ground.args) {
            let Term::Ground(value) = arg else {
                return None;
            };
            match pat {
                Term::Ground(expected) => {
                    if expected != value {
                        return None;
                    }
                }
                Term::Var { name, ty } => {
                    if value.var_type() != *ty {
                        return None;
                    }
                    match subst.get(name) {
                        Some(bound) if bound != value => return None,
                        Some(_) => {}
                        None => {
                            subst.bind(name.clone(), value.clone());
                        }
                    }
                }
            }
        }
        Some(subst)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.functor)?;
        f.write_str("(")?;
        for (i, arg) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{arg}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for Predicate {
    type Err = BeliefError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> BeliefError {
        BeliefError::Parse { offset: self.pos, message: message.to_string() }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<&str, BeliefError> {
        let start = self.pos;
        let mut chars = self.rest().char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return Err(self.err("expected identifier")),
        }
        let len = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map(|(i, _)| i)
            .unwrap_or(self.src.len() - start);
        self.pos += len;
        Ok(&self.src[start..self.pos])
    }

    fn predicate(&mut self) -> Result<Predicate, BeliefError> {
        let functor = self.ident()?.to_string();
        self.skip_ws();
        let mut args = Vec::new();
        if self.eat('(') {
            self.skip_ws();
            if !self.eat(')') {
                loop {
                    self.skip_ws();
                    args.push(self.term()?);
                    self.skip_ws();
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        return Err(self.err("expected ',' or ')'"));
                    }
                }
            }
        }
        Predicate::new(functor, args)
    }

    fn term(&mut self) -> Result<Term, BeliefError> {
        match self.peek() {
            Some('"') => Ok(Term::text(self.string()?)),
            Some(c) if c == '-' || c.is_ascii_digit() => Ok(Term::int(self.integer()?)),
            Some(_) => {
                let kw = self.ident()?;
                let ty = match kw {
                    "string" => VarType::Text,
                    "int" => VarType::Int,
                    _ => return Err(self.err("expected `string` or `int` variable declaration")),
                };
                self.skip_ws();
                let name = self.ident()?.to_string();
                Ok(Term::Var { name, ty })
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<i64, BeliefError> {
        let start = self.pos;
        self.eat('-');
        let digits = self.rest().chars().take_while(char::is_ascii_digit).count();
        if digits == 0 {
            return Err(self.err("expected digits"));
        }
        self.pos += digits;
        self.src[start..self.pos]
            .parse()
            .map_err(|_| BeliefError::Parse { offset: start, message: "integer out of range".into() })
    }

    fn string(&mut self) -> Result<String, BeliefError> {
        self.eat('"');
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err("unterminated string"));
            };
            self.pos += c.len_utf8();
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let Some(e) = self.peek() else {
                        return Err(self.err("unterminated escape"));
                    };
                    self.pos += e.len_utf8();
                    out.push(match e {
                        'n' => '\n',
                        'r' => '\r',
                        't' => '\t',
                        '"' => '"',
                        '\\' => '\\',
                        _ => return Err(self.err("unknown escape")),
                    });
                }
                c => out.push(c),
            }
        }
    }
}

/// Variable bindings produced by a query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution(BTreeMap<String, Value>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn bind(&mut self, name: impl Into<String>, value: Value) {
        self.0.insert(name.into(), value);
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(Value::as_text)
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(Value::as_int)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Insertion-ordered set of ground beliefs.
#[derive(Debug, Clone, Default)]
pub struct BeliefBase {
    beliefs: IndexMap<Predicate, u64>,
    next_seq: u64,
}

impl BeliefBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a ground belief. Re-adding a present belief is a no-op.
    pub fn add(&mut self, p: Predicate) -> Result<bool, BeliefError> {
        if !p.is_ground() {
            return Err(BeliefError::NonGroundBelief(p.to_string()));
        }
        if self.beliefs.contains_key(&p) {
            return Ok(false);
        }
        self.beliefs.insert(p, self.next_seq);
        self.next_seq += 1;
        Ok(true)
    }

    /// Removes a ground belief; absent beliefs are ignored.
    pub fn remove(&mut self, p: &Predicate) -> Result<bool, BeliefError> {
        if !p.is_ground() {
            return Err(BeliefError::NonGroundBelief(p.to_string()));
        }
        Ok(self.beliefs.shift_remove(p).is_some())
    }

    /// Removes every belief unifying with `pattern`, returning how many went.
    pub fn remove_matching(&mut self, pattern: &Predicate) -> usize {
        let before = self.beliefs.len();
        self.beliefs.retain(|b, _| pattern.unify(b).is_none());
        before - self.beliefs.len()
    }

    pub fn contains(&self, p: &Predicate) -> bool {
        self.beliefs.contains_key(p)
    }

    pub fn sequence_of(&self, p: &Predicate) -> Option<u64> {
        self.beliefs.get(p).copied()
    }

    pub fn query(&self, pattern: &Predicate) -> Vec<Substitution> {
        self.beliefs.keys().filter_map(|b| pattern.unify(b)).collect()
    }

    pub fn first(&self, pattern: &Predicate) -> Option<Substitution> {
        self.beliefs.keys().find_map(|b| pattern.unify(b))
    }

    pub fn holds(&self, pattern: &Predicate) -> bool {
        self.first(pattern).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.beliefs.keys()
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// One belief per line in the transcript form.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for b in self.iter() {
            out.push_str(&b.to_string());
            out.push('\n');
        }
        out
    }

    /// Reads the line form back. Blank lines are skipped.
    pub fn from_lines(text: &str) -> Result<Self, BeliefError> {
        let mut bb = BeliefBase::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            bb.add(Predicate::parse(line)?)?;
        }
        Ok(bb)
    }
}

impl<'a> IntoIterator for &'a BeliefBase {
    type Item = &'a Predicate;
    type IntoIter = indexmap::map::Keys<'a, Predicate, u64>;

    fn into_iter(self) -> Self::IntoIter {
        self.beliefs.keys()
    }
}
