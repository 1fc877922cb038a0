//! Arithmetic expressions in `t` and `x`, used for nonlinearities `f(t, x)`
//! and right-hand sides `sigma(t)`.
//!
//! Grammar (whitespace is ignored between tokens):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("+" | "-") unary | power
//! power   := primary ("^" unary)?            right associative
//! primary := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! number  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
//! ```
//!
//! Names: the variables `t` and `x`, the constants `pi` and `T` (interval
//! length), and the functions `sin`, `cos`, `exp`, `sqrt`, `abs` (one
//! argument) and `pow` (two). `-x^2` parses as `-(x^2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    T,
    X,
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, t: f64, x: f64, t_end: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(Var::T) => t,
            Node::Var(Var::X) => x,
            Node::Var(Var::Length) => t_end,
            Node::Neg(a) => -a.eval(t, x, t_end),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(t, x, t_end), b.eval(t, x, t_end));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Node::Call(f, args) => {
                let a = args[0].eval(t, x, t_end);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Pow => a.powf(args[1].eval(t, x, t_end)),
                }
            }
        }
    }

    fn uses(&self, var: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(v) => *v == var,
            Node::Neg(a) => a.uses(var),
            Node::Bin(_, a, b) => a.uses(var) || b.uses(var),
            Node::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            src: source,
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < source.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value at `(t, x)` on an interval of length `t_end`.
    pub fn eval(&self, t: f64, x: f64, t_end: f64) -> f64 {
        self.root.eval(t, x, t_end)
    }

    pub fn depends_on_x(&self) -> bool {
        self.root.uses(Var::X)
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.name(),
            Some(c) => Err(self.error(format!("unexpected '{c}'"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > s
        };
        let mut p = self.pos;
        let mut any = digits(&mut p);
        if p < bytes.len() && bytes[p] == b'.' {
            p += 1;
            any |= digits(&mut p);
        }
        if !any {
            return Err(self.error("malformed number"));
        }
        if p < bytes.len() && (bytes[p] == b'e' || bytes[p] == b'E') {
            let mut q = p + 1;
            if q < bytes.len() && (bytes[q] == b'+' || bytes[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Parse {
                offset: start,
                message: "malformed number".into(),
            })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        let name = &rest[..len];
        self.pos += len;
        if let Some(f) = Func::lookup(name) {
            self.expect('(')?;
            let mut args = vec![self.expr()?];
            while self.eat(',') {
                args.push(self.expr()?);
            }
            self.expect(')')?;
            if args.len() != f.arity() {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("{name} takes {} argument(s), got {}", f.arity(), args.len()),
                });
            }
            return Ok(Node::Call(f, args));
        }
        match name {
            "t" => Ok(Node::Var(Var::T)),
            "x" => Ok(Node::Var(Var::X)),
            "T" => Ok(Node::Var(Var::Length)),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            _ => Err(Error::Parse {
                offset: start,
                message: format!("unknown name '{name}'"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(s: &str, t: f64, x: f64) -> f64 {
        Expression::parse(s).unwrap().eval(t, x, 1.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2 ^ -1", 0.0, 0.0), 0.5);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("5 - 3 - 1", 0.0, 0.0), 1.0);
    }

    #[test]
    fn variables_constants_functions() {
        assert_eq!(ev("t*(1-t)", 0.5, 0.0), 0.25);
        assert!((ev("sin(pi*t)/pi", 0.5, 0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(ev("pow(x, 2) + abs(-t)", 0.5, 3.0), 9.5);
        assert_eq!(ev("sqrt(T)", 0.0, 0.0), 1.0);
        assert!((ev("exp(1) - cos(0)", 0.0, 0.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert_eq!(ev("1.5e2 + .5 + 2E-1", 0.0, 0.0), 150.7);
        assert!((ev("(2 + sin(x))/3", 0.0, 1.0) - (2.0 + 1f64.sin()) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn x_dependence() {
        assert!(!Expression::parse("t*(1-t)").unwrap().depends_on_x());
        assert!(Expression::parse("t + 0*x").unwrap().depends_on_x());
    }

    #[test]
    fn errors_carry_offsets() {
        let e = Expression::parse("1 + * 2").unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                offset: 4,
                message: "unexpected '*'".into()
            }
        );
        assert!(matches!(
            Expression::parse("sin(1, 2)"),
            Err(Error::Parse { offset: 0, .. })
        ));
        assert!(matches!(Expression::parse("foo"), Err(Error::Parse { .. })));
        assert!(matches!(
            Expression::parse("(1 + 2"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            Expression::parse("1 2"),
            Err(Error::Parse { offset: 2, .. })
        ));
        assert!(matches!(Expression::parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn serde_uses_source_text() {
        let e = Expression::parse("t * (1 - t)").unwrap();
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"t * (1 - t)\"");
        let back: Expression = serde_json::from_str(&json).unwrap();
        assert_eq!(back, e);
    }
}
