//! Coefficient expressions: a small recursive-descent parser, an evaluator and
//! grid sampling.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?          right associative
//! exponent:= '-' exponent | power
//! primary := number | name | func '(' args ')' | '(' expr ')'
//! ```
//!
//! Names are `x`, `y`, `u`, `p1`, `p2`, `u1`, `u2`, ... and the constant `pi`.
//! Plain coefficient fields may only use `x` and `y`; the remaining names are
//! state variables for quasi-linear fluxes and reactions.

use std::fmt;

use crate::error::{EvalDomainError, ParseError};
use crate::mesh::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
    /// Own-species state `u` in a flux `a(x, u, p)`.
    U,
    /// Gradient component `p1` / `p2` (1-based).
    P(usize),
    /// Species state `u1`, `u2`, ... (1-based).
    Species(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Tanh => "tanh",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values bound to the variables of an expression.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub coords: [f64; 2],
    pub u: f64,
    pub p: [f64; 2],
    pub species: &'a [f64],
}

impl<'a> Env<'a> {
    pub fn at(coords: [f64; 2]) -> Self {
        Env {
            coords,
            ..Default::default()
        }
    }
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Lit(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    /// `Some(c)` if the expression contains no variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.vars().is_empty() {
            self.eval(&Env::default()).ok()
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Lit(v) if *v == 0.0)
    }

    /// Every variable referenced, in first-occurrence order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Neg(a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Checks that only spatial variables valid in `dim` dimensions appear.
    pub fn validate_spatial(&self, dim: usize) -> Result<(), String> {
        for v in self.vars() {
            match v {
                Var::X => {}
                Var::Y if dim == 2 => {}
                Var::Y => return Err("variable y used in a 1D problem".into()),
                other => {
                    return Err(format!(
                        "state variable {} not allowed in a coefficient field",
                        VarDisplay(other)
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, env: &Env) -> Result<f64, EvalDomainError> {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Var(v) => match *v {
                Var::X => Ok(env.coords[0]),
                Var::Y => Ok(env.coords[1]),
                Var::U => Ok(env.u),
                Var::P(i) => env
                    .p
                    .get(i - 1)
                    .copied()
                    .ok_or_else(|| EvalDomainError::new(format!("unbound p{i}"))),
                Var::Species(k) => env
                    .species
                    .get(k - 1)
                    .copied()
                    .ok_or_else(|| EvalDomainError::new(format!("unbound u{k}"))),
            },
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Bin(op, a, b) => {
                let l = a.eval(env)?;
                let r = b.eval(env)?;
                match op {
                    BinOp::Add => Ok(l + r),
                    BinOp::Sub => Ok(l - r),
                    BinOp::Mul => Ok(l * r),
                    BinOp::Div => {
                        if r == 0.0 {
                            Err(EvalDomainError::new("division by zero"))
                        } else {
                            Ok(l / r)
                        }
                    }
                    BinOp::Pow => pow(l, r),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(env)?;
                match f {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => Ok(a.exp()),
                    Func::Tanh => Ok(a.tanh()),
                    Func::Abs => Ok(a.abs()),
                    Func::Log => {
                        if a > 0.0 {
                            Ok(a.ln())
                        } else {
                            Err(EvalDomainError::new(format!("log of {a}")))
                        }
                    }
                    Func::Sqrt => {
                        if a >= 0.0 {
                            Ok(a.sqrt())
                        } else {
                            Err(EvalDomainError::new(format!("sqrt of {a}")))
                        }
                    }
                    Func::Min => Ok(a.min(args[1].eval(env)?)),
                    Func::Max => Ok(a.max(args[1].eval(env)?)),
                }
            }
        }
    }
}

impl Expr {
    pub fn depends_on(&self, v: Var) -> bool {
        self.vars().contains(&v)
    }

    /// Closed-form partial derivative with respect to `v`.
    ///
    /// `None` when `v` appears under `abs`, `min` or `max`.
    pub fn derivative(&self, v: Var) -> Option<Expr> {
        if !self.depends_on(v) {
            return Some(lit(0.0));
        }
        Some(match self {
            Expr::Lit(_) => lit(0.0),
            Expr::Var(w) => lit(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(v)?),
            Expr::Bin(op, a, b) => {
                let (da, db) = (a.derivative(v)?, b.derivative(v)?);
                let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
                match op {
                    BinOp::Add => add(da, db),
                    BinOp::Sub => sub(da, db),
                    BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                    BinOp::Div => sub(
                        div(da, b.clone()),
                        div(mul(a, db), mul(b.clone(), b)),
                    ),
                    BinOp::Pow if !b.depends_on(v) => {
                        let e = match b {
                            Expr::Lit(c) => lit(c - 1.0),
                            _ => sub(b.clone(), lit(1.0)),
                        };
                        mul(mul(b, pow_expr(a, e)), da)
                    }
                    BinOp::Pow => {
                        let ln = Expr::Call(Func::Log, vec![a.clone()]);
                        let inner = add(mul(db, ln), div(mul(b.clone(), da), a.clone()));
                        mul(pow_expr(a, b), inner)
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].clone();
                let da = match f {
                    Func::Abs | Func::Min | Func::Max => return None,
                    _ => a.derivative(v)?,
                };
                let outer = match f {
                    Func::Sin => Expr::Call(Func::Cos, vec![a]),
                    Func::Cos => neg(Expr::Call(Func::Sin, vec![a])),
                    Func::Exp => Expr::Call(Func::Exp, vec![a]),
                    Func::Log => div(lit(1.0), a),
                    Func::Sqrt => div(lit(0.5), Expr::Call(Func::Sqrt, vec![a])),
                    Func::Tanh => {
                        let t = Expr::Call(Func::Tanh, vec![a]);
                        sub(lit(1.0), mul(t.clone(), t))
                    }
                    Func::Abs | Func::Min | Func::Max => unreachable!(),
                };
                mul(outer, da)
            }
        })
    }
}

fn lit(v: f64) -> Expr {
    Expr::Lit(v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Lit(v) => lit(-v),
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Lit(x), Expr::Lit(y)) => lit(x + y),
        (Expr::Lit(z), _) if *z == 0.0 => b,
        (_, Expr::Lit(z)) if *z == 0.0 => a,
        _ => Expr::bin(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Lit(x), Expr::Lit(y)) => lit(x - y),
        (Expr::Lit(z), _) if *z == 0.0 => neg(b),
        (_, Expr::Lit(z)) if *z == 0.0 => a,
        _ => Expr::bin(BinOp::Sub, a, b),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Lit(x), Expr::Lit(y)) => lit(x * y),
        (Expr::Lit(z), _) | (_, Expr::Lit(z)) if *z == 0.0 => lit(0.0),
        (Expr::Lit(o), _) if *o == 1.0 => b,
        (_, Expr::Lit(o)) if *o == 1.0 => a,
        _ => Expr::bin(BinOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Lit(z), _) if *z == 0.0 => lit(0.0),
        (_, Expr::Lit(o)) if *o == 1.0 => a,
        _ => Expr::bin(BinOp::Div, a, b),
    }
}

fn pow_expr(a: Expr, e: Expr) -> Expr {
    match e {
        Expr::Lit(0.0) => lit(1.0),
        Expr::Lit(1.0) => a,
        e => Expr::bin(BinOp::Pow, a, e),
    }
}

fn pow(base: f64, exp: f64) -> Result<f64, EvalDomainError> {
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(EvalDomainError::new(format!(
            "negative base {base} with non-integer exponent {exp}"
        )));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(EvalDomainError::new("zero to a negative power"));
    }
    Ok(base.powf(exp))
}

/// Evaluates `e` at a spatial point (1 or 2 coordinates).
pub fn eval_expr(e: &Expr, point: &[f64]) -> Result<f64, EvalDomainError> {
    let mut coords = [0.0; 2];
    for (c, p) in coords.iter_mut().zip(point) {
        *c = *p;
    }
    if point.len() < 2 && e.vars().contains(&Var::Y) {
        return Err(EvalDomainError::new("y evaluated at a 1D point"));
    }
    e.eval(&Env::at(coords))
}

struct VarDisplay(Var);

impl fmt::Display for VarDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Var::X => write!(f, "x"),
            Var::Y => write!(f, "y"),
            Var::U => write!(f, "u"),
            Var::P(i) => write!(f, "p{i}"),
            Var::Species(k) => write!(f, "u{k}"),
        }
    }
}

/// Fully parenthesized form; `parse_expr` of the output rebuilds the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{:?})", -v)
            }
            Expr::Lit(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{}", VarDisplay(*v)),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
    End,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    tok: Tok,
    tok_start: usize,
}

fn err(offset: usize, expected: &[&str]) -> ParseError {
    ParseError {
        offset,
        expected: expected.iter().map(|s| s.to_string()).collect(),
    }
}

const EXPECT_OPERAND: &[&str] = &["number", "variable", "function", "(", "-"];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            tok: Tok::End,
            tok_start: 0,
        };
        p.advance()?;
        Ok(p)
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            self.tok = Tok::End;
            return Ok(());
        };
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit()) {
                self.pos += 1;
            }
            if self.src.get(self.pos) == Some(&b'.') {
                self.pos += 1;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
            if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
                let save = self.pos;
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
                let digits = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if digits == self.pos {
                    self.pos = save;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let v: f64 = text.parse().map_err(|_| err(start, &["number"]))?;
            self.tok = Tok::Num(v);
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            self.tok = Tok::Name(String::from_utf8_lossy(&self.src[start..self.pos]).into());
        } else if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            self.tok = Tok::Op(c as char);
        } else {
            return Err(err(self.pos, &["number", "variable", "operator"]));
        }
        Ok(())
    }

    fn eat(&mut self, op: char) -> Result<bool, ParseError> {
        if self.tok == Tok::Op(op) {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-')? {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat('^')? {
            let exp = self.exponent()?;
            Ok(Expr::bin(BinOp::Pow, base, exp))
        } else {
            Ok(base)
        }
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-')? {
            Ok(Expr::Neg(Box::new(self.exponent()?)))
        } else {
            self.power()
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.tok_start;
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Expr::Lit(v))
            }
            Tok::Op('(') => {
                self.advance()?;
                let e = self.expr()?;
                if !self.eat(')')? {
                    return Err(err(self.tok_start, &[")"]));
                }
                Ok(e)
            }
            Tok::Name(name) => {
                self.advance()?;
                if let Some(func) = Func::from_name(&name) {
                    if !self.eat('(')? {
                        return Err(err(self.tok_start, &["("]));
                    }
                    let mut args = vec![self.expr()?];
                    while self.eat(',')? {
                        args.push(self.expr()?);
                    }
                    if args.len() != func.arity() {
                        let expected = if args.len() < func.arity() { "," } else { ")" };
                        return Err(err(self.tok_start, &[expected]));
                    }
                    if !self.eat(')')? {
                        return Err(err(self.tok_start, &[")"]));
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    parse_name(&name)
                        .ok_or_else(|| err(start, &["variable", "function"]))
                }
            }
            _ => Err(err(start, EXPECT_OPERAND)),
        }
    }
}

fn parse_name(name: &str) -> Option<Expr> {
    Some(match name {
        "x" => Expr::Var(Var::X),
        "y" => Expr::Var(Var::Y),
        "u" => Expr::Var(Var::U),
        "pi" => Expr::Lit(std::f64::consts::PI),
        _ => {
            let (head, idx) = name.split_at(1);
            let k: usize = idx.parse().ok().filter(|k| *k >= 1)?;
            if !idx.chars().all(|c| c.is_ascii_digit()) {
                return None;
            }
            match head {
                "p" if k <= 2 => Expr::Var(Var::P(k)),
                "u" => Expr::Var(Var::Species(k)),
                _ => return None,
            }
        }
    })
}

/// Parses one expression; the whole input must be consumed.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(err(src.len(), EXPECT_OPERAND));
    }
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(err(p.tok_start, &["operator", "end of input"]));
    }
    Ok(e)
}

/// An expression sampled at every node of a grid, in canonical node order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid_id: u64,
    pub values: Vec<f64>,
}

pub fn sample_field(e: &Expr, grid: &Grid) -> Result<SampledField, crate::Error> {
    e.validate_spatial(grid.dim())
        .map_err(crate::Error::Validation)?;
    if let Some(c) = e.as_constant() {
        return Ok(SampledField {
            grid_id: grid.id(),
            values: vec![c; grid.node_count()],
        });
    }
    let values = (0..grid.node_count())
        .map(|node| {
            e.eval(&Env::at(grid.coords(node)))
                .map_err(|err| crate::Error::EvalDomainAt { err, node })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampledField {
        grid_id: grid.id(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn lit(v: f64) -> Expr {
        Expr::Lit(v)
    }

    fn x() -> Expr {
        Expr::Var(Var::X)
    }

    #[test]
    fn precedence_and_calls() {
        let e = p("2*x + sin(y)");
        assert_eq!(
            e,
            Expr::bin(
                BinOp::Add,
                Expr::bin(BinOp::Mul, lit(2.0), x()),
                Expr::Call(Func::Sin, vec![Expr::Var(Var::Y)])
            )
        );
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(
            p("x^2^3"),
            Expr::bin(BinOp::Pow, x(), Expr::bin(BinOp::Pow, lit(2.0), lit(3.0)))
        );
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(
            p("-x^2"),
            Expr::Neg(Box::new(Expr::bin(BinOp::Pow, x(), lit(2.0))))
        );
        assert_eq!(
            p("x^-2"),
            Expr::bin(BinOp::Pow, x(), Expr::Neg(Box::new(lit(2.0))))
        );
        assert_eq!(p("1 - 2 - 3").eval(&Env::default()).unwrap(), -4.0);
        assert_eq!(p("8 / 4 / 2").eval(&Env::default()).unwrap(), 1.0);
    }

    #[test]
    fn malformed_argument_list() {
        let e = parse_expr("min(1, )").unwrap_err();
        assert_eq!(e.offset, 7);
        assert!(e.expected.iter().any(|s| s == "number"));
    }

    #[test]
    fn other_parse_errors() {
        assert!(parse_expr("").is_err());
        assert!(parse_expr("2 +").is_err());
        assert!(parse_expr("(x").is_err());
        assert!(parse_expr("foo(x)").is_err());
        assert!(parse_expr("z").is_err());
        assert!(parse_expr("sin x").is_err());
        assert!(parse_expr("min(1)").is_err());
        assert!(parse_expr("sin(1, 2)").is_err());
        assert_eq!(parse_expr("x $ 2").unwrap_err().offset, 2);
    }

    #[test]
    fn evaluation_examples() {
        let e = p("2*x + sin(y)");
        assert_eq!(eval_expr(&e, &[0.5, 0.0]).unwrap(), 1.0);
        assert_eq!(eval_expr(&lit(7.0), &[0.3]).unwrap(), 7.0);
        assert!(eval_expr(&p("sqrt(x)"), &[-1.0]).is_err());
        assert!(eval_expr(&p("log(x)"), &[0.0]).is_err());
        assert!(eval_expr(&p("x^0.5"), &[-2.0]).is_err());
        assert_eq!(eval_expr(&p("x^2"), &[-2.0]).unwrap(), 4.0);
        assert!(eval_expr(&p("1/x"), &[0.0]).is_err());
        assert_eq!(eval_expr(&p("max(x, 2) + min(x, 2)"), &[3.0]).unwrap(), 5.0);
        assert!((eval_expr(&p("pi"), &[]).unwrap() - std::f64::consts::PI).abs() == 0.0);
    }

    #[test]
    fn state_variables() {
        let e = p("u1*u2 + p1 - u");
        let env = Env {
            coords: [0.0, 0.0],
            u: 0.5,
            p: [3.0, 0.0],
            species: &[1.0, 2.0],
        };
        assert_eq!(e.eval(&env).unwrap(), 4.5);
        assert!(e.validate_spatial(2).is_err());
        assert!(p("x + y").validate_spatial(1).is_err());
        assert!(p("x + y").validate_spatial(2).is_ok());
    }

    #[test]
    fn sampling_order() {
        let g = Grid::new_1d(0.0, 1.0, 4).unwrap();
        let f = sample_field(&x(), &g).unwrap();
        assert_eq!(f.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let ones = sample_field(&lit(1.0), &g).unwrap();
        assert!(ones.values.iter().all(|v| *v == 1.0));

        let g = Grid::new_1d(0.0, std::f64::consts::PI, 4).unwrap();
        let s = sample_field(&p("sin(x)"), &g).unwrap();
        let interior: Vec<f64> = g.interior_nodes().map(|n| s.values[n]).collect();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in interior.iter().zip([h, 1.0, h]) {
            assert!((got - want).abs() < 1e-15);
        }

        let g2 = Grid::new_2d([0.0, 0.0], [1.0, 2.0], [3, 4]).unwrap();
        let fx = sample_field(&x(), &g2).unwrap();
        let fy = sample_field(&Expr::Var(Var::Y), &g2).unwrap();
        for node in 0..g2.node_count() {
            let c = g2.coords(node);
            assert_eq!(fx.values[node], c[0]);
            assert_eq!(fy.values[node], c[1]);
        }
        // x is fastest
        assert_eq!(fx.values[1], 1.0 / 3.0);
        assert_eq!(fy.values[4], 0.5);
    }

    #[test]
    fn sampling_reports_node() {
        let g = Grid::new_1d(-1.0, 1.0, 4).unwrap();
        match sample_field(&p("sqrt(x)"), &g) {
            Err(crate::Error::EvalDomainAt { node, .. }) => assert_eq!(node, 0),
            other => panic!("{other:?}"),
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Lit),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
            (1usize..4).prop_map(|k| Expr::Var(Var::Species(k))),
            (1usize..3).prop_map(|k| Expr::Var(Var::P(k))),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
                inner.clone().prop_map(|e| Expr::Call(Func::Tanh, vec![e])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    #[test]
    fn derivatives_match_hand_rules() {
        let env = Env {
            coords: [0.3, 0.0],
            u: 1.5,
            p: [0.7, -0.2],
            species: &[1.0, 2.0],
        };
        let d = |src: &str, v: Var| p(src).derivative(v).unwrap().eval(&env).unwrap();
        assert_eq!(d("u1*u2", Var::Species(2)), 1.0);
        assert_eq!(d("u1*u2", Var::Species(1)), 2.0);
        assert!((d("(1+u^2)*p1", Var::P(1)) - 3.25).abs() < 1e-15);
        assert!((d("(1+u^2)*p1", Var::U) - 2.0 * 1.5 * 0.7).abs() < 1e-15);
        assert!((d("sin(x*u)", Var::U) - 0.3 * (0.45f64).cos()).abs() < 1e-15);
        assert!((d("exp(p2)/u", Var::U) + (-0.2f64).exp() / 2.25).abs() < 1e-15);
        assert!((d("u^u", Var::U) - 1.5f64.powf(1.5) * (1.5f64.ln() + 1.0)).abs() < 1e-14);
        assert!((d("tanh(u)", Var::U) - (1.0 - 1.5f64.tanh().powi(2))).abs() < 1e-15);
        assert_eq!(p("x + p1").derivative(Var::U), Some(Expr::Lit(0.0)));
        assert_eq!(p("abs(u)").derivative(Var::U), None);
        assert_eq!(p("abs(x) * u").derivative(Var::U), Some(p("abs(x)")));
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(&back, &e);
            let again = parse_expr(&back.to_string()).unwrap();
            prop_assert_eq!(again, back);
        }

        #[test]
        fn evaluation_is_pure(e in arb_expr(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let env = Env { coords: [a, b], u: a, p: [b, a], species: &[a, b, a * b] };
            let r1 = e.eval(&env).map(f64::to_bits);
            let r2 = e.eval(&env).map(f64::to_bits);
            prop_assert_eq!(r1, r2);
        }
    }
}
