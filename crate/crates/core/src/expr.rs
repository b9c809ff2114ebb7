//! Expression trees for model right-hand sides.
//!
//! An [`Expr`] is built from constants, variables, `+ - * /` and integer
//! powers. It can be normalized into a sum of monomials ([`Expr::simplify`]),
//! compiled into a postfix [`Tape`] and evaluated either pointwise (`f64`) or
//! over intervals ([`Interval`]).

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops;

use crate::error::{EvalError, ParseError};
use crate::interval::Interval;

/// A model variable: state component, control input, or exogenous signal.
///
/// Exogenous variables stand for upstream states that a subsystem reads but
/// does not own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    State(usize),
    Input(usize),
    Exo(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn state(i: usize) -> Expr {
        Expr::Var(Var::State(i))
    }

    pub fn input(i: usize) -> Expr {
        Expr::Var(Var::Input(i))
    }

    pub fn exo(i: usize) -> Expr {
        Expr::Var(Var::Exo(i))
    }

    pub fn pow(self, n: u32) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    /// All variables the expression reads.
    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                out.insert(*v);
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces every variable by the expression `f` returns for it.
    pub fn substitute(&self, f: &dyn Fn(Var) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => f(*v),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(f))),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.substitute(f)), *n),
            Expr::Add(a, b) => Expr::Add(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute(f)), Box::new(b.substitute(f))),
        }
    }

    /// Polynomial degree in the given variable class, `None` if not polynomial.
    pub fn degree_in(&self, pred: &dyn Fn(Var) -> bool) -> Option<u32> {
        match self {
            Expr::Const(_) => Some(0),
            Expr::Var(v) => Some(u32::from(pred(*v))),
            Expr::Neg(a) => a.degree_in(pred),
            Expr::Pow(a, n) => a.degree_in(pred).map(|d| d * n),
            Expr::Add(a, b) | Expr::Sub(a, b) => Some(a.degree_in(pred)?.max(b.degree_in(pred)?)),
            Expr::Mul(a, b) => Some(a.degree_in(pred)? + b.degree_in(pred)?),
            Expr::Div(a, b) => match b.degree_in(pred)? {
                0 => a.degree_in(pred),
                _ => None,
            },
        }
    }

    /// Normalizes polynomial subtrees into a canonical sum of monomials with
    /// like terms collected, so that cancelling terms (`-x + x`) disappear
    /// before interval evaluation.
    pub fn simplify(&self) -> Expr {
        if let Some(p) = Poly::from_expr(self) {
            return p.to_expr();
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.simplify())),
            Expr::Pow(a, n) => Expr::Pow(Box::new(a.simplify()), *n),
            Expr::Add(a, b) => Expr::Add(Box::new(a.simplify()), Box::new(b.simplify())),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.simplify()), Box::new(b.simplify())),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.simplify()), Box::new(b.simplify())),
            Expr::Div(a, b) => Expr::Div(Box::new(a.simplify()), Box::new(b.simplify())),
        }
    }

    /// Formats with caller-chosen variable names.
    pub fn display_with<'a>(&'a self, names: &'a dyn Fn(Var) -> String) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Const(_) | Expr::Var(_) => 5,
        }
    }
}

pub fn default_var_name(v: Var) -> String {
    match v {
        Var::State(i) => format!("x{}", i + 1),
        Var::Input(i) => format!("u{}", i + 1),
        Var::Exo(i) => format!("e{}", i + 1),
    }
}

struct Named<'a> {
    expr: &'a Expr,
    names: &'a dyn Fn(Var) -> String,
}

impl Named<'_> {
    fn child<'b>(&'b self, e: &'b Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = Named {
            expr: e,
            names: self.names,
        };
        if e.precedence() < min_prec {
            write!(f, "({inner})")
        } else {
            write!(f, "{inner}")
        }
    }
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => f.write_str(&(self.names)(*v)),
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.child(a, 3, f)
            }
            Expr::Pow(a, n) => {
                self.child(a, 5, f)?;
                write!(f, "^{n}")
            }
            Expr::Add(a, b) => {
                self.child(a, 1, f)?;
                f.write_str(" + ")?;
                self.child(b, 2, f)
            }
            Expr::Sub(a, b) => {
                self.child(a, 1, f)?;
                f.write_str(" - ")?;
                self.child(b, 2, f)
            }
            Expr::Mul(a, b) => {
                self.child(a, 2, f)?;
                f.write_str("*")?;
                self.child(b, 3, f)
            }
            Expr::Div(a, b) => {
                self.child(a, 2, f)?;
                f.write_str("/")?;
                self.child(b, 3, f)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with(&default_var_name))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

/// Monomial as sorted `(variable, exponent)` pairs; the empty monomial is 1.
type Monomial = Vec<(Var, u32)>;

#[derive(Clone, Debug, Default)]
struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    fn constant(c: f64) -> Poly {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    fn var(v: Var) -> Poly {
        let mut terms = BTreeMap::new();
        terms.insert(alloc::vec![(v, 1)], 1.0);
        Poly { terms }
    }

    fn from_expr(e: &Expr) -> Option<Poly> {
        Some(match e {
            Expr::Const(c) => Poly::constant(*c),
            Expr::Var(v) => Poly::var(*v),
            Expr::Neg(a) => Poly::from_expr(a)?.scale(-1.0),
            Expr::Add(a, b) => Poly::from_expr(a)?.add(&Poly::from_expr(b)?),
            Expr::Sub(a, b) => Poly::from_expr(a)?.add(&Poly::from_expr(b)?.scale(-1.0)),
            Expr::Mul(a, b) => Poly::from_expr(a)?.mul(&Poly::from_expr(b)?),
            Expr::Div(a, b) => {
                let d = Poly::from_expr(b)?;
                let c = d.as_constant()?;
                if c == 0.0 {
                    return None;
                }
                // only exact reciprocals keep the normal form faithful
                let r = 1.0 / c;
                if r * c != 1.0 || libm::fma(r, c, -1.0) != 0.0 {
                    return None;
                }
                Poly::from_expr(a)?.scale(r)
            }
            Expr::Pow(a, n) => {
                let base = Poly::from_expr(a)?;
                let mut acc = Poly::constant(1.0);
                for _ in 0..*n {
                    acc = acc.mul(&base);
                }
                acc
            }
        })
    }

    fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    fn scale(mut self, k: f64) -> Poly {
        for c in self.terms.values_mut() {
            *c *= k;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    fn add(mut self, other: &Poly) -> Poly {
        for (m, c) in &other.terms {
            *self.terms.entry(m.clone()).or_insert(0.0) += c;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = merge_monomials(ma, mb);
                *out.terms.entry(m).or_insert(0.0) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    fn to_expr(&self) -> Expr {
        // constant term last, remaining monomials in canonical order
        let mut ordered: Vec<(&Monomial, f64)> = self
            .terms
            .iter()
            .filter(|(m, _)| !m.is_empty())
            .map(|(m, c)| (m, *c))
            .collect();
        if let Some(c) = self.terms.get(&Vec::new()) {
            ordered.push((&EMPTY_MONOMIAL, *c));
        }
        let mut acc: Option<Expr> = None;
        for (m, c) in ordered {
            let negative = c < 0.0;
            let magnitude = if acc.is_some() && negative { -c } else { c };
            let term = monomial_expr(m, magnitude);
            acc = Some(match acc {
                None => term,
                Some(prev) if negative => prev - term,
                Some(prev) => prev + term,
            });
        }
        acc.unwrap_or(Expr::Const(0.0))
    }
}

static EMPTY_MONOMIAL: Monomial = Vec::new();

fn merge_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

fn monomial_expr(m: &Monomial, coeff: f64) -> Expr {
    let mut factors = m.iter().map(|&(v, k)| match k {
        1 => Expr::Var(v),
        _ => Expr::Var(v).pow(k),
    });
    let Some(first) = factors.next() else {
        return Expr::Const(coeff);
    };
    let product = factors.fold(first, |acc, f| acc * f);
    if coeff == 1.0 {
        product
    } else if coeff == -1.0 {
        -product
    } else {
        Expr::Const(coeff) * product
    }
}

/// Arithmetic needed to run a [`Tape`].
pub trait Arith: Copy {
    fn constant(c: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div(self, o: Self) -> Result<Self, EvalError>;
    fn powi(self, n: u32) -> Self;
}

impl Arith for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn div(self, o: Self) -> Result<Self, EvalError> {
        Ok(self / o)
    }
    fn powi(self, n: u32) -> Self {
        let mut acc = 1.0;
        for _ in 0..n {
            acc *= self;
        }
        acc
    }
}

impl Arith for Interval {
    fn constant(c: f64) -> Self {
        Interval::point(c)
    }
    fn add(self, o: Self) -> Self {
        Interval::add(self, o)
    }
    fn sub(self, o: Self) -> Self {
        Interval::sub(self, o)
    }
    fn mul(self, o: Self) -> Self {
        Interval::mul(self, o)
    }
    fn neg(self) -> Self {
        Interval::neg(self)
    }
    fn div(self, o: Self) -> Result<Self, EvalError> {
        Interval::div(self, o)
    }
    fn powi(self, n: u32) -> Self {
        Interval::powi(self, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(f64),
    Load(Var),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow(u32),
}

/// Postfix program compiled from an [`Expr`].
#[derive(Clone, Debug, PartialEq)]
pub struct Tape {
    ops: Vec<Op>,
    depth: usize,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut ops = Vec::new();
        emit(e, &mut ops);
        let mut depth = 0usize;
        let mut cur = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => cur += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => cur -= 1,
                Op::Neg | Op::Pow(_) => {}
            }
            depth = depth.max(cur);
        }
        Tape { ops, depth }
    }

    /// Evaluates with `stack` as scratch space (cleared on entry).
    pub fn eval<T: Arith>(&self, x: &[T], u: &[T], e: &[T], stack: &mut Vec<T>) -> Result<T, EvalError> {
        stack.clear();
        stack.reserve(self.depth);
        for op in &self.ops {
            match *op {
                Op::Const(c) => stack.push(T::constant(c)),
                Op::Load(v) => stack.push(match v {
                    Var::State(i) => x[i],
                    Var::Input(i) => u[i],
                    Var::Exo(i) => e[i],
                }),
                Op::Neg => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.neg());
                }
                Op::Pow(n) => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(a.powi(n));
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().expect("tape underflow");
                    let a = stack.pop().expect("tape underflow");
                    stack.push(match *op {
                        Op::Add => a.add(b),
                        Op::Sub => a.sub(b),
                        Op::Mul => a.mul(b),
                        _ => a.div(b)?,
                    });
                }
            }
        }
        Ok(stack.pop().expect("empty tape"))
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Const(c) => ops.push(Op::Const(*c)),
        Expr::Var(v) => ops.push(Op::Load(*v)),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Pow(a, n) => {
            emit(a, ops);
            ops.push(Op::Pow(*n));
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            emit(a, ops);
            emit(b, ops);
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
    }
}

/// Parses an infix expression such as `2*x1^2 - x3 + u1`.
///
/// Identifiers are resolved by `resolve`, which may map names to variables or
/// to named constants. Supported syntax: numbers, identifiers, parentheses,
/// unary minus, `+ - * /` and `^` with a non-negative integer exponent.
pub fn parse(src: &str, resolve: &dyn Fn(&str) -> Option<Expr>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        resolve,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<Expr>,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.to_owned(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' { lhs + rhs } else { lhs - rhs };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' { lhs * rhs } else { lhs / rhs };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            let n: u32 = digits
                .parse()
                .map_err(|_| self.error("exponent must be a non-negative integer"))?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    let exp_sign =
                        (c == b'-' || c == b'+') && self.pos > start && matches!(self.src[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                text.parse::<f64>().map(Expr::Const).map_err(|_| ParseError {
                    offset: start,
                    message: format!("invalid number `{text}`"),
                })
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                (self.resolve)(name).ok_or_else(|| ParseError {
                    offset: start,
                    message: format!("unknown identifier `{name}`"),
                })
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

/// Resolver for the default naming scheme `x1.., u1.., e1..` (1-based).
pub fn default_resolver(name: &str) -> Option<Expr> {
    let (head, digits) = name.split_at(1);
    let k: usize = digits.parse().ok()?;
    if k == 0 {
        return None;
    }
    match head {
        "x" => Some(Expr::state(k - 1)),
        "u" => Some(Expr::input(k - 1)),
        "e" => Some(Expr::exo(k - 1)),
        _ => None,
    }
}
