//! Arithmetic expression language used in problem files.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | ident | ident '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-tau^2` is `-(tau^2)`.
//! Builtins: `sin cos exp log sqrt abs gamma` (one argument), `pow(x, y)`,
//! `mlf1(α, z)`, `mlf2(α, β, z)`, `mlf3(α, β, ρ, z)`. The identifier `pi`
//! is a constant.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::mittag_leffler::{self, MlError, MlParams};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("lex error at byte {offset}: unexpected character {found:?}")]
    Lex { offset: usize, found: char },
    #[error("lex error at byte {offset}: malformed number {text:?}")]
    BadNumber { offset: usize, text: String },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("arity error at byte {offset}: {name} takes {expected} argument(s), got {found}")]
    Arity { offset: usize, name: String, expected: usize, found: usize },
    #[error("unknown variable {name:?} (allowed: {allowed})")]
    UnknownVariable { name: String, allowed: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0:?}")]
    Unbound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite result from {0}")]
    NonFinite(String),
    #[error(transparent)]
    MittagLeffler(#[from] MlError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'^' => TokenKind::Caret,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i);
                let text = &source[start..i];
                let value: f64 = text
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| ExprError::BadNumber { offset: start, text: text.to_string() })?;
                tokens.push(Token { kind: TokenKind::Num(value), offset: start });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(source[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                let found = source[start..].chars().next().unwrap_or('\u{FFFD}');
                return Err(ExprError::Lex { offset: start, found });
            }
        };
        tokens.push(Token { kind, offset: start });
        i += 1;
    }
    Ok(tokens)
}

fn scan_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

const UNARY_PRECEDENCE: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Gamma,
    Pow,
    Mlf1,
    Mlf2,
    Mlf3,
}

impl Builtin {
    pub const ALL: [Builtin; 11] = [
        Builtin::Sin,
        Builtin::Cos,
        Builtin::Exp,
        Builtin::Log,
        Builtin::Sqrt,
        Builtin::Abs,
        Builtin::Gamma,
        Builtin::Pow,
        Builtin::Mlf1,
        Builtin::Mlf2,
        Builtin::Mlf3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Exp => "exp",
            Builtin::Log => "log",
            Builtin::Sqrt => "sqrt",
            Builtin::Abs => "abs",
            Builtin::Gamma => "gamma",
            Builtin::Pow => "pow",
            Builtin::Mlf1 => "mlf1",
            Builtin::Mlf2 => "mlf2",
            Builtin::Mlf3 => "mlf3",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Pow | Builtin::Mlf1 => 2,
            Builtin::Mlf2 => 3,
            Builtin::Mlf3 => 4,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    fn apply(self, args: &[f64]) -> Result<f64, EvalError> {
        let x = args[0];
        let value = match self {
            Builtin::Sin => x.sin(),
            Builtin::Cos => x.cos(),
            Builtin::Exp => x.exp(),
            Builtin::Log => {
                if x <= 0.0 {
                    return Err(EvalError::Domain(format!("log({x}) of a nonpositive number")));
                }
                x.ln()
            }
            Builtin::Sqrt => {
                if x < 0.0 {
                    return Err(EvalError::Domain(format!("sqrt({x}) of a negative number")));
                }
                x.sqrt()
            }
            Builtin::Abs => x.abs(),
            Builtin::Gamma => mittag_leffler::gamma(x),
            Builtin::Pow => pow(x, args[1]),
            Builtin::Mlf1 => mittag_leffler::ml_one(x, args[1])?,
            Builtin::Mlf2 => mittag_leffler::ml_two(x, args[1], args[2])?,
            Builtin::Mlf3 => {
                mittag_leffler::ml_prabhakar(MlParams::new(x, args[1], args[2])?, args[3])?
            }
        };
        finite(value, self.name())
    }
}

/// Real power with `0^0 = 1`.
fn pow(base: f64, exponent: f64) -> f64 {
    base.powf(exponent)
}

fn finite(value: f64, what: &str) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite(what.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Constant(f64),
    Variable(String),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Builtin, Vec<Node>),
}

impl Node {
    fn visit_variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Node::Constant(_) => {}
            Node::Variable(name) => out.push(name),
            Node::Unary(_, inner) => inner.visit_variables(out),
            Node::Binary(_, lhs, rhs) => {
                lhs.visit_variables(out);
                rhs.visit_variables(out);
            }
            Node::Call(_, args) => args.iter().for_each(|a| a.visit_variables(out)),
        }
    }

    fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        match self {
            Node::Constant(c) => Ok(*c),
            Node::Variable(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone())),
            Node::Unary(UnaryOp::Neg, inner) => Ok(-inner.eval(lookup)?),
            Node::Binary(op, lhs, rhs) => {
                let a = lhs.eval(lookup)?;
                let b = rhs.eval(lookup)?;
                let value = match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                    BinaryOp::Pow => pow(a, b),
                };
                finite(value, op.symbol())
            }
            Node::Call(f, args) => {
                let mut values = [0.0; 4];
                for (slot, arg) in values.iter_mut().zip(args) {
                    *slot = arg.eval(lookup)?;
                }
                f.apply(&values[..args.len()])
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Node::Constant(c) => write!(f, "{c:?}"),
            Node::Variable(name) => f.write_str(name),
            Node::Unary(UnaryOp::Neg, inner) => {
                let wrap = parent > UNARY_PRECEDENCE;
                if wrap {
                    f.write_str("(")?;
                }
                f.write_str("-")?;
                inner.fmt_prec(f, UNARY_PRECEDENCE)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Node::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                let wrap = parent > p;
                if wrap {
                    f.write_str("(")?;
                }
                if *op == BinaryOp::Pow {
                    // left operand must be an atom; right side parses as unary
                    lhs.fmt_prec(f, p + 1)?;
                    f.write_str("^")?;
                    rhs.fmt_prec(f, UNARY_PRECEDENCE)?;
                } else {
                    lhs.fmt_prec(f, p)?;
                    write!(f, " {} ", op.symbol())?;
                    rhs.fmt_prec(f, p + 1)?;
                }
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Node::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    arg.fmt_prec(f, 0)?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    depth: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Parse { offset: self.offset(), message: message.into() }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error("expression nested too deeply"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => BinaryOp::Add,
                Some(TokenKind::Minus) => BinaryOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => BinaryOp::Mul,
                Some(TokenKind::Slash) => BinaryOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        self.enter()?;
        let node = if self.eat(&TokenKind::Minus) {
            Node::Unary(UnaryOp::Neg, Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(node)
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(&TokenKind::Caret) {
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let offset = self.offset();
        match self.peek() {
            Some(TokenKind::Num(v)) => {
                self.pos += 1;
                Ok(Node::Constant(*v))
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(&TokenKind::RParen) {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                if self.eat(&TokenKind::LParen) {
                    let builtin = Builtin::from_name(name).ok_or_else(|| ExprError::Parse {
                        offset,
                        message: format!("unknown function {name:?}"),
                    })?;
                    let args = self.arguments()?;
                    if args.len() != builtin.arity() {
                        return Err(ExprError::Arity {
                            offset,
                            name: name.clone(),
                            expected: builtin.arity(),
                            found: args.len(),
                        });
                    }
                    Ok(Node::Call(builtin, args))
                } else if name == "pi" {
                    Ok(Node::Constant(std::f64::consts::PI))
                } else {
                    Ok(Node::Variable(name.clone()))
                }
            }
            Some(other) => Err(self.error(format!("unexpected token {other:?}"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn arguments(&mut self) -> Result<Vec<Node>, ExprError> {
        let mut args = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&TokenKind::Comma) {
                continue;
            }
            if self.eat(&TokenKind::RParen) {
                return Ok(args);
            }
            return Err(self.error("expected ',' or ')' in argument list"));
        }
    }
}

/// Parses a token stream into a tree.
pub fn parse(tokens: &[Token]) -> Result<Node, ExprError> {
    let end = tokens.last().map_or(0, |t| t.offset + 1);
    let mut parser = Parser { tokens, pos: 0, depth: 0, end };
    let root = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(root)
}

/// A parsed, immutable expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    /// Parses `source` without restricting variable names.
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let root = parse(&tokenize(source)?)?;
        Ok(Self { root, source: source.to_string() })
    }

    /// Parses `source` and rejects variables outside `allowed`.
    pub fn parse_with_vars(source: &str, allowed: &[&str]) -> Result<Self, ExprError> {
        let expr = Self::parse(source)?;
        if let Some(bad) = expr.variables().into_iter().find(|v| !allowed.contains(v)) {
            return Err(ExprError::UnknownVariable {
                name: bad.to_string(),
                allowed: allowed.join(", "),
            });
        }
        Ok(expr)
    }

    pub fn from_node(root: Node) -> Self {
        let source = root_to_string(&root);
        Self { root, source }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Distinct variable names in first-appearance order.
    pub fn variables(&self) -> Vec<&str> {
        let mut all = Vec::new();
        self.root.visit_variables(&mut all);
        let mut seen = Vec::new();
        for v in all {
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        seen
    }

    /// Evaluates with `(name, value)` bindings.
    pub fn eval(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        self.root.eval(&|name| bindings.iter().find(|(n, _)| *n == name).map(|(_, v)| *v))
    }

    pub fn eval_map(&self, bindings: &HashMap<String, f64>) -> Result<f64, EvalError> {
        self.root.eval(&|name| bindings.get(name).copied())
    }
}

fn root_to_string(root: &Node) -> String {
    struct Show<'a>(&'a Node);
    impl fmt::Display for Show<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            self.0.fmt_prec(f, 0)
        }
    }
    Show(root).to_string()
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt_prec(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
