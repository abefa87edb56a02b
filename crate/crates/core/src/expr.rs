//! Closed-form field expressions over `(t, x, y)` and, for conductivity and
//! coupling laws, `theta`.
//!
//! Grammar (all arithmetic in `f64`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | '+' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names: `t`, `x`, `y`, `theta`, `pi`, `e`. Functions: `sin`, `cos`,
//! `exp`, `ln`, `sqrt`, `abs`, `min`, `max`, `clamp(v, lo, hi)`.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    Y,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Min,
    Max,
    Clamp,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "exp" => (Func::Exp, 1),
            "ln" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "clamp" => (Func::Clamp, 3),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// Values bound to the variables of an expression.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// A parsed expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parses `source`, accepting only the variables listed in `allowed`.
    pub fn parse(source: &str, allowed: &[Var]) -> Result<Self> {
        let mut p = Parser {
            src: source,
            bytes: source.as_bytes(),
            pos: 0,
            allowed,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            source: format!("{v}"),
            root: Node::Num(v),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, b: &Bindings) -> f64 {
        eval(&self.root, b)
    }

    pub fn eval_txy(&self, t: f64, x: f64, y: f64) -> f64 {
        self.eval(&Bindings {
            t,
            x,
            y,
            theta: 0.0,
        })
    }

    pub fn uses(&self, v: Var) -> bool {
        uses(&self.root, v)
    }

    /// Value if the expression has no free variables.
    pub fn as_constant(&self) -> Option<f64> {
        [Var::T, Var::X, Var::Y, Var::Theta]
            .iter()
            .all(|&v| !self.uses(v))
            .then(|| self.eval(&Bindings::default()))
    }
}

fn eval(n: &Node, b: &Bindings) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::T) => b.t,
        Node::Var(Var::X) => b.x,
        Node::Var(Var::Y) => b.y,
        Node::Var(Var::Theta) => b.theta,
        Node::Neg(a) => -eval(a, b),
        Node::Add(l, r) => eval(l, b) + eval(r, b),
        Node::Sub(l, r) => eval(l, b) - eval(r, b),
        Node::Mul(l, r) => eval(l, b) * eval(r, b),
        Node::Div(l, r) => eval(l, b) / eval(r, b),
        Node::Pow(l, r) => {
            let base = eval(l, b);
            match r.as_ref() {
                Node::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(*e as i32),
                _ => base.powf(eval(r, b)),
            }
        }
        Node::Call(f, args) => {
            let a = |k: usize| eval(&args[k], b);
            match f {
                Func::Sin => a(0).sin(),
                Func::Cos => a(0).cos(),
                Func::Exp => a(0).exp(),
                Func::Ln => a(0).ln(),
                Func::Sqrt => a(0).sqrt(),
                Func::Abs => a(0).abs(),
                Func::Min => a(0).min(a(1)),
                Func::Max => a(0).max(a(1)),
                Func::Clamp => a(0).max(a(1)).min(a(2)),
            }
        }
    }
}

fn uses(n: &Node, v: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(w) => *w == v,
        Node::Neg(a) => uses(a, v),
        Node::Add(l, r) | Node::Sub(l, r) | Node::Mul(l, r) | Node::Div(l, r) | Node::Pow(l, r) => {
            uses(l, v) || uses(r, v)
        }
        Node::Call(_, args) => args.iter().any(|a| uses(a, v)),
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    allowed: &'a [Var],
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parameter(format!(
            "expression {:?}: {msg} at column {}",
            self.src,
            self.pos + 1
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| {
                self.pos = start;
                self.error("malformed number")
            })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            let Some((func, arity)) = Func::lookup(name) else {
                self.pos = start;
                return Err(self.error(&format!("unknown function '{name}'")));
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected ')' after arguments"));
            }
            if args.len() != arity {
                return Err(self.error(&format!(
                    "'{name}' takes {arity} argument(s), got {}",
                    args.len()
                )));
            }
            return Ok(Node::Call(func, args));
        }
        let var = match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "t" => Var::T,
            "x" => Var::X,
            "y" => Var::Y,
            "theta" => Var::Theta,
            _ => {
                self.pos = start;
                return Err(self.error(&format!("unknown name '{name}'")));
            }
        };
        if !self.allowed.contains(&var) {
            self.pos = start;
            return Err(self.error(&format!("variable '{name}' is not allowed here")));
        }
        Ok(Node::Var(var))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TXY: &[Var] = &[Var::T, Var::X, Var::Y];

    fn ev(s: &str, t: f64, x: f64, y: f64) -> f64 {
        Expr::parse(s, TXY).unwrap().eval_txy(t, x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0, 0.0), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0, 0.0), 1.0);
        assert_eq!(ev("1/2", 0.0, 0.0, 0.0), 0.5);
        assert_eq!(ev("2*-3", 0.0, 0.0, 0.0), -6.0);
        assert_eq!(ev("1.5e-3 * 2E2", 0.0, 0.0, 0.0), 0.3);
    }

    #[test]
    fn functions_and_variables() {
        let v = ev(
            "sin(pi*x)^2 * cos(t) + clamp(1 + y, 1, 3) + max(x, y) - min(2, t)",
            0.0,
            0.5,
            4.0,
        );
        assert!((v - (1.0 + 3.0 + 4.0)).abs() < 1e-15);
        assert_eq!(ev("exp(0) + ln(e) + sqrt(4) + abs(-1)", 0.0, 0.0, 0.0), 5.0);
        let k = Expr::parse("clamp(1 + theta, 1, 3)", &[Var::Theta]).unwrap();
        assert_eq!(
            k.eval(&Bindings {
                theta: 1.0,
                ..Default::default()
            }),
            2.0
        );
        assert!(k.uses(Var::Theta) && !k.uses(Var::X));
        assert_eq!(
            Expr::parse("2*pi", TXY).unwrap().as_constant(),
            Some(2.0 * std::f64::consts::PI)
        );
        assert_eq!(Expr::parse("x", TXY).unwrap().as_constant(), None);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "1 +",
            "sin(1",
            "foo(1)",
            "sin(1, 2)",
            "2 3",
            "theta",
            "z",
            "1..2",
            "#",
        ] {
            assert!(
                matches!(Expr::parse(bad, TXY), Err(Error::Parameter(_))),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("1 + x*y", TXY).unwrap();
        assert_eq!(Expr::parse(&e.to_string(), TXY).unwrap(), e);
    }
}
