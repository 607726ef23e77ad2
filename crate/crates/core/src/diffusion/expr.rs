//! Coefficient expressions over `t`, `x`, `a` and the statistics `m0, m1, ...`.
//!
//! Grammar: numbers, the variables above, `+ - * / ^`, parentheses and the
//! functions `tanh sin cos exp abs sqrt sq min max clip`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    A,
    Stat(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Tanh,
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Sq,
    Min,
    Max,
    Clip,
}

impl Func {
    fn parse(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "tanh" => (Func::Tanh, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "exp" => (Func::Exp, 1),
            "abs" => (Func::Abs, 1),
            "sqrt" => (Func::Sqrt, 1),
            "sq" => (Func::Sq, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "clip" => (Func::Clip, 3),
            _ => return None,
        })
    }
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
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Point at which an expression is evaluated.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub t: f64,
    pub x: f64,
    pub a: f64,
    pub m: &'a [f64],
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Scenario(format!(
                "unexpected trailing input in `{src}`"
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::T) => env.t,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::A) => env.a,
            Expr::Var(Var::Stat(j)) => env.m[*j],
            Expr::Neg(e) => -e.eval(env),
            Expr::Add(l, r) => l.eval(env) + r.eval(env),
            Expr::Sub(l, r) => l.eval(env) - r.eval(env),
            Expr::Mul(l, r) => l.eval(env) * r.eval(env),
            Expr::Div(l, r) => l.eval(env) / r.eval(env),
            Expr::Pow(l, r) => l.eval(env).powf(r.eval(env)),
            Expr::Call(f, args) => {
                let v = |i: usize| args[i].eval(env);
                match f {
                    Func::Tanh => v(0).tanh(),
                    Func::Sin => v(0).sin(),
                    Func::Cos => v(0).cos(),
                    Func::Exp => v(0).exp(),
                    Func::Abs => v(0).abs(),
                    Func::Sqrt => v(0).sqrt(),
                    Func::Sq => {
                        let y = v(0);
                        y * y
                    }
                    Func::Min => v(0).min(v(1)),
                    Func::Max => v(0).max(v(1)),
                    Func::Clip => v(0).clamp(v(1), v(2)),
                }
            }
        }
    }

    /// True when the expression reads the variable.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.uses(var),
            Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r)
            | Expr::Pow(l, r) => l.uses(var) || r.uses(var),
            Expr::Call(_, args) => args.iter().any(|e| e.uses(var)),
        }
    }

    /// Largest statistic index read, if any.
    pub fn max_stat(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(Var::Stat(j)) => Some(*j),
            Expr::Var(_) => None,
            Expr::Neg(e) => e.max_stat(),
            Expr::Add(l, r)
            | Expr::Sub(l, r)
            | Expr::Mul(l, r)
            | Expr::Div(l, r)
            | Expr::Pow(l, r) => l.max_stat().max(r.max_stat()),
            Expr::Call(_, args) => args.iter().filter_map(|e| e.max_stat()).max(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::A) => write!(f, "a"),
            Expr::Var(Var::Stat(j)) => write!(f, "m{j}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Sub(l, r) => write!(f, "({l} - {r})"),
            Expr::Mul(l, r) => write!(f, "({l} * {r})"),
            Expr::Div(l, r) => write!(f, "({l} / {r})"),
            Expr::Pow(l, r) => write!(f, "({l} ^ {r})"),
            Expr::Call(func, args) => {
                let name = format!("{func:?}").to_lowercase();
                write!(f, "{name}(")?;
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

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Scenario(format!("bad number `{s}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Scenario(format!(
                "unexpected character `{c}` in `{src}`"
            )));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self, op: char) -> bool {
        matches!(self.tokens.get(self.pos), Some(Token::Op(c)) if *c == op)
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Scenario(format!(
                "expected `{op}` at token {}",
                self.pos
            )))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.peek_op('/') {
                self.pos += 1;
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek_op('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Scenario("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::Op('(') => {
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Op(c) => Err(Error::Scenario(format!("unexpected `{c}`"))),
            Token::Ident(name) => {
                if let Some((func, arity)) = Func::parse(&name) {
                    self.expect('(')?;
                    let mut args = vec![self.sum()?];
                    while self.peek_op(',') {
                        self.pos += 1;
                        args.push(self.sum()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Scenario(format!(
                            "`{name}` takes {arity} arguments, got {}",
                            args.len()
                        )));
                    }
                    return Ok(Expr::Call(func, args));
                }
                match name.as_str() {
                    "t" => Ok(Expr::Var(Var::T)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "a" => Ok(Expr::Var(Var::A)),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    s if s.len() > 1
                        && s.starts_with('m')
                        && s[1..].chars().all(|c| c.is_ascii_digit()) =>
                    {
                        Ok(Expr::Var(Var::Stat(s[1..].parse().expect("digits"))))
                    }
                    _ => Err(Error::Scenario(format!("unknown name `{name}`"))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, t: f64, x: f64, a: f64, m: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(&Env { t, x, a, m })
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(at("1 + 2 * 3", 0.0, 0.0, 0.0, &[]), 7.0);
        assert_eq!(at("-2 ^ 2", 0.0, 0.0, 0.0, &[]), -4.0);
        assert_eq!(at("2 ^ 3 ^ 2", 0.0, 0.0, 0.0, &[]), 512.0);
        assert_eq!(at("clip(x, -1, 1) + sq(a)", 0.0, 3.0, 2.0, &[]), 5.0);
        assert_eq!(at("m1 - m0 + t", 0.5, 0.0, 0.0, &[1.0, 4.0]), 3.5);
        assert!((at("tanh(0.5) * 2e-1", 0.0, 0.0, 0.0, &[]) - 0.2 * 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["1 +", "foo(x)", "min(x)", "x $ 2", "(x", "x y"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("0.5 * sq(a) - tanh(x - m0) / 3 + clip(x, -2, 2)").unwrap();
        assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        assert_eq!(e.max_stat(), Some(0));
        assert!(e.uses(Var::A) && !e.uses(Var::T));
    }
}
