//! Small symbolic expressions in the spatial coordinates, with exact
//! differentiation. Factors of PG kernels are stored in this form so that
//! Sobolev-type norms can use their derivatives.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate index: 0 is `x`/`r1`, 1 is `y`/`r2`.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Neg(Box<Expr>),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(v) => Expr::Const(-v),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr, p: f64) -> Expr {
        if p == 0.0 {
            return Expr::Const(1.0);
        }
        if p == 1.0 {
            return a;
        }
        match a.as_const() {
            Some(v) => Expr::Const(v.powf(p)),
            None => Expr::Pow(Box::new(a), p),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a.as_const() {
            Some(v) => Expr::Const(v.cos()),
            None => Expr::Cos(Box::new(a)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a.as_const() {
            Some(v) => Expr::Const(v.sin()),
            None => Expr::Sin(Box::new(a)),
        }
    }

    pub fn eval(&self, r: &[f64]) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Var(i) => r.get(*i).copied().unwrap_or(0.0),
            Expr::Add(a, b) => a.eval(r) + b.eval(r),
            Expr::Mul(a, b) => a.eval(r) * b.eval(r),
            Expr::Pow(a, p) => {
                let base = a.eval(r);
                if p.fract() == 0.0 && p.abs() < 64.0 {
                    base.powi(*p as i32)
                } else {
                    base.powf(*p)
                }
            }
            Expr::Neg(a) => -a.eval(r),
            Expr::Cos(a) => a.eval(r).cos(),
            Expr::Sin(a) => a.eval(r).sin(),
        }
    }

    /// Partial derivative with respect to coordinate `i`.
    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::c(0.0),
            Expr::Var(j) => Expr::c(if *j == i { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.diff(i), b.diff(i)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(i), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(i)),
            ),
            Expr::Pow(a, p) => {
                let da = a.diff(i);
                if da.is_zero() {
                    return Expr::c(0.0);
                }
                Expr::mul(Expr::mul(Expr::c(*p), Expr::pow((**a).clone(), p - 1.0)), da)
            }
            Expr::Neg(a) => Expr::neg(a.diff(i)),
            Expr::Cos(a) => Expr::neg(Expr::mul(Expr::sin((**a).clone()), a.diff(i))),
            Expr::Sin(a) => Expr::mul(Expr::cos((**a).clone()), a.diff(i)),
        }
    }

    /// Mixed partial derivative for a multi-index `alpha` (one order per axis).
    pub fn diff_multi(&self, alpha: &[usize]) -> Expr {
        let mut e = self.clone();
        for (axis, &order) in alpha.iter().enumerate() {
            for _ in 0..order {
                e = e.diff(axis);
            }
        }
        e
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var(0) => write!(f, "x"),
            Expr::Var(1) => write!(f, "y"),
            Expr::Var(i) => write!(f, "r{}", i + 1),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Pow(a, p) => write!(f, "({a})^{p}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
        }
    }
}

// expr   := term (('+' | '-') term)*
// term   := unary (('*' | '/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
// atom   := number | pi | x | y | r1 | r2 | (cos|sin|sqrt) '(' expr ')' | '(' expr ')'
struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            if self.eat(b'+') {
                e = Expr::add(e, self.term()?);
            } else if self.eat(b'-') {
                e = Expr::sub(e, self.term()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.unary()?;
        loop {
            if self.eat(b'*') {
                e = Expr::mul(e, self.unary()?);
            } else if self.eat(b'/') {
                let at = self.pos;
                let d = self.unary()?;
                match d.as_const() {
                    Some(v) if v != 0.0 => e = Expr::mul(e, Expr::c(1.0 / v)),
                    _ => {
                        return Err(Error::Parse {
                            pos: at,
                            msg: "division only by nonzero constants".into(),
                        })
                    }
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::neg(self.unary()?));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let at = self.pos;
            let ex = self.unary()?;
            return match ex.as_const() {
                Some(p) => Ok(Expr::pow(base, p)),
                None => Err(Error::Parse { pos: at, msg: "exponent must be constant".into() }),
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                match name {
                    "x" | "r1" => Ok(Expr::var(0)),
                    "y" | "r2" => Ok(Expr::var(1)),
                    "pi" => Ok(Expr::c(std::f64::consts::PI)),
                    "cos" | "sin" | "sqrt" => {
                        if !self.eat(b'(') {
                            return Err(self.err("expected '(' after function name"));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.err("expected ')'"));
                        }
                        Ok(match name {
                            "cos" => Expr::cos(arg),
                            "sin" => Expr::sin(arg),
                            _ => Expr::pow(arg, 0.5),
                        })
                    }
                    _ => Err(Error::Parse { pos: start, msg: format!("unknown identifier '{name}'") }),
                }
            }
            _ => Err(self.err("unexpected token")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.s;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut k = self.pos + 1;
            if k < s.len() && (s[k] == b'+' || s[k] == b'-') {
                k += 1;
            }
            if k < s.len() && s[k].is_ascii_digit() {
                self.pos = k;
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let txt = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        txt.parse::<f64>()
            .map(Expr::c)
            .map_err(|_| Error::Parse { pos: start, msg: format!("bad number '{txt}'") })
    }
}
