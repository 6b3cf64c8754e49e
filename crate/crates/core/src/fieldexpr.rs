//! The field expression language.
//!
//! Every analytic field of a scenario (base fields, gauge fields, the gauge
//! map generator and shift) is written as a small expression over the
//! coordinates. Grammar, whitespace-insensitive and ASCII only:
//!
//! ```text
//! expr     = term { ("+" | "-") term } ;
//! term     = unary { ("*" | "/") unary } ;
//! unary    = "-" unary | power ;
//! power    = atom [ "^" exponent ] ;
//! exponent = int [ "^" exponent ] | "(" int ")" ;
//! int      = [ "-" ] digits ;
//! atom     = number [ "i" ] | "i" | "pi" | coord
//!          | func "(" expr ")" | "(" expr ")" ;
//! coord    = "t" | "x" | "y" | "z" | "x0" | "x1" | "x2" | "x3" ;
//! func     = "sin" | "cos" | "exp" | "conj" ;
//! number   = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!          | "." digits [ ... ] ;
//! ```
//!
//! Precedence is `^` over unary minus over `* /` over `+ -`. Binary
//! operators associate to the left; `^` associates to the right and its
//! exponent is always an integer, so `2^3^2` folds to the exponent `9`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::error::Result;
use crate::jets::{Jet, Order, SpacetimePoint, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Conj,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Conj => "conj",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "conj" => Some(Func::Conj),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldExpr {
    /// Nonnegative real or imaginary literal as written in the source.
    Literal(C64),
    /// Coordinate `x^μ`, μ in 0..4.
    Coord(u8),
    ImagUnit,
    Pi,
    Neg(Box<FieldExpr>),
    Add(Box<FieldExpr>, Box<FieldExpr>),
    Sub(Box<FieldExpr>, Box<FieldExpr>),
    Mul(Box<FieldExpr>, Box<FieldExpr>),
    Div(Box<FieldExpr>, Box<FieldExpr>),
    Pow(Box<FieldExpr>, i32),
    Call(Func, Box<FieldExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", .expected.join(" | "))]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl FieldExpr {
    pub fn parse(src: &str) -> Result<Self, SyntaxError> {
        let tokens = lex(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: src.len(),
        };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some(_) => Err(p.error(&["operator", "end of input"])),
        }
    }

    /// Jet of the denoted function at `point`.
    pub fn eval(&self, point: &SpacetimePoint, order: Order) -> Result<Jet> {
        Ok(match self {
            FieldExpr::Literal(c) => Jet::constant(*c, order),
            FieldExpr::Coord(mu) => Jet::seed_coordinate(usize::from(*mu), point, order),
            FieldExpr::ImagUnit => Jet::constant(C64::new(0.0, 1.0), order),
            FieldExpr::Pi => Jet::real(std::f64::consts::PI, order),
            FieldExpr::Neg(a) => -a.eval(point, order)?,
            FieldExpr::Add(a, b) => a.eval(point, order)? + b.eval(point, order)?,
            FieldExpr::Sub(a, b) => a.eval(point, order)? - b.eval(point, order)?,
            FieldExpr::Mul(a, b) => a.eval(point, order)? * b.eval(point, order)?,
            FieldExpr::Div(a, b) => a.eval(point, order)?.try_div(&b.eval(point, order)?)?,
            FieldExpr::Pow(a, n) => a.eval(point, order)?.powi(*n)?,
            FieldExpr::Call(f, a) => {
                let v = a.eval(point, order)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Conj => v.conj(),
                }
            }
        })
    }

    /// Canonical source text; parsing it gives back the same tree.
    pub fn print(&self) -> String {
        self.to_string()
    }
}

impl FromStr for FieldExpr {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, SyntaxError> {
        FieldExpr::parse(s)
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::Literal(c) => {
                let part = |v: f64, unit: &str| {
                    if v.is_sign_negative() {
                        format!("(-{:?}{unit})", -v)
                    } else {
                        format!("{v:?}{unit}")
                    }
                };
                if c.im == 0.0 {
                    f.write_str(&part(c.re, ""))
                } else if c.re == 0.0 {
                    f.write_str(&part(c.im, "i"))
                } else {
                    write!(f, "({} + {})", part(c.re, ""), part(c.im, "i"))
                }
            }
            FieldExpr::Coord(mu) => f.write_str(["t", "x", "y", "z"][usize::from(*mu)]),
            FieldExpr::ImagUnit => f.write_str("i"),
            FieldExpr::Pi => f.write_str("pi"),
            FieldExpr::Neg(a) => write!(f, "(-{a})"),
            FieldExpr::Add(a, b) => write!(f, "({a} + {b})"),
            FieldExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            FieldExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            FieldExpr::Div(a, b) => write!(f, "({a} / {b})"),
            FieldExpr::Pow(a, n) => write!(f, "({a}^({n}))"),
            FieldExpr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident(String),
    Int(String),
    Sym(char),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Imag(v) => format!("imaginary literal {v}i"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(s) => format!("integer {s}"),
            Tok::Sym(c) => format!("`{c}`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut integral = true;
            if i < bytes.len() && bytes[i] == b'.' {
                integral = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    integral = false;
                    i = k;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| SyntaxError {
                offset: start,
                expected: vec!["number".into()],
                found: text.into(),
            })?;
            let imag = i < bytes.len()
                && bytes[i] == b'i'
                && !bytes
                    .get(i + 1)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_');
            if imag {
                i += 1;
                out.push((start, Tok::Imag(value)));
            } else if integral {
                out.push((start, Tok::Int(text.into())));
            } else {
                out.push((start, Tok::Num(value)));
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].into())));
            continue;
        }
        match c {
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                out.push((start, Tok::Sym(char::from(c))));
                i += 1;
            }
            _ => {
                // report the whole (possibly multi-byte) character
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(SyntaxError {
                    offset: start,
                    expected: vec!["ASCII expression token".into()],
                    found: format!("`{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

const ATOM_START: &[&str] = &[
    "number",
    "`i`",
    "`pi`",
    "coordinate",
    "function",
    "`(`",
    "`-`",
];

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self
                .peek()
                .map_or_else(|| "end of input".to_string(), Tok::describe),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), SyntaxError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{c}`")]))
        }
    }

    fn expr(&mut self) -> Result<FieldExpr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym('+') {
                lhs = FieldExpr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym('-') {
                lhs = FieldExpr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<FieldExpr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym('*') {
                lhs = FieldExpr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym('/') {
                lhs = FieldExpr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<FieldExpr, SyntaxError> {
        if self.eat_sym('-') {
            return Ok(FieldExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr, SyntaxError> {
        let base = self.atom()?;
        if self.eat_sym('^') {
            let n = self.exponent()?;
            return Ok(FieldExpr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, SyntaxError> {
        if self.eat_sym('(') {
            let n = self.int()?;
            self.expect_sym(')')?;
            return Ok(n);
        }
        let at = self.offset();
        let n = self.int()?;
        if self.eat_sym('^') {
            let e = self.exponent()?;
            let overflow = || SyntaxError {
                offset: at,
                expected: vec!["exponent within i32 range".into()],
                found: format!("{n}^{e}"),
            };
            let e = u32::try_from(e).map_err(|_| overflow())?;
            return n.checked_pow(e).ok_or_else(overflow);
        }
        Ok(n)
    }

    fn int(&mut self) -> Result<i32, SyntaxError> {
        let neg = self.eat_sym('-');
        let at = self.offset();
        match self.peek() {
            Some(Tok::Int(s)) => {
                let s = s.clone();
                let v: i32 = s.parse().map_err(|_| SyntaxError {
                    offset: at,
                    expected: vec!["integer exponent within i32 range".into()],
                    found: s.clone(),
                })?;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error(&["integer exponent"])),
        }
    }

    fn atom(&mut self) -> Result<FieldExpr, SyntaxError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.error(ATOM_START)),
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(FieldExpr::Literal(C64::new(v, 0.0)))
            }
            Tok::Int(s) => {
                self.pos += 1;
                let v: f64 = s.parse().map_err(|_| self.error(&["number"]))?;
                Ok(FieldExpr::Literal(C64::new(v, 0.0)))
            }
            Tok::Imag(v) => {
                self.pos += 1;
                Ok(FieldExpr::Literal(C64::new(0.0, v)))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let coord = match name.as_str() {
                    "t" | "x0" => Some(0),
                    "x" | "x1" => Some(1),
                    "y" | "x2" => Some(2),
                    "z" | "x3" => Some(3),
                    _ => None,
                };
                if let Some(mu) = coord {
                    self.pos += 1;
                    return Ok(FieldExpr::Coord(mu));
                }
                match name.as_str() {
                    "i" => {
                        self.pos += 1;
                        Ok(FieldExpr::ImagUnit)
                    }
                    "pi" => {
                        self.pos += 1;
                        Ok(FieldExpr::Pi)
                    }
                    _ => match Func::from_name(&name) {
                        Some(func) => {
                            self.pos += 1;
                            self.expect_sym('(')?;
                            let arg = self.expr()?;
                            self.expect_sym(')')?;
                            Ok(FieldExpr::Call(func, Box::new(arg)))
                        }
                        None => Err(self.error(ATOM_START)),
                    },
                }
            }
            Tok::Sym(_) => Err(self.error(ATOM_START)),
        }
    }
}
