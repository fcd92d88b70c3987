//! Small arithmetic expression language used by config files for prescribed
//! curvatures, boundary data and integrands.
//!
//! Grammar: numbers, variables `x1..xn`, `z`, `p1..pm`, the constant `pi`,
//! binary `+ - * / ^` (with `^` right associative), unary minus, and the
//! functions `sin cos exp log sqrt abs`. Expressions can be differentiated
//! symbolically, so curvature gradients and integrand Hessians are exact.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// Spatial coordinate, zero based (`x1` is `X(0)`).
    X(usize),
    /// Height variable.
    Z,
    /// Direction variable for integrands, zero based.
    P(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Variable bindings for evaluation. Missing variables evaluate to an error.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub z: Option<f64>,
    pub p: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn xz(x: &'a [f64], z: f64) -> Self {
        Self { x, z: Some(z), p: &[] }
    }

    pub fn x(x: &'a [f64]) -> Self {
        Self { x, z: None, p: &[] }
    }

    pub fn p(p: &'a [f64]) -> Self {
        Self { x: &[], z: None, p }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input at token {} in `{src}`",
                parser.pos + 1
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, b: &Bindings) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => match *v {
                Var::X(i) => *b
                    .x
                    .get(i)
                    .ok_or_else(|| Error::Expr(format!("x{} is not bound", i + 1)))?,
                Var::Z => b.z.ok_or_else(|| Error::Expr("z is not bound".into()))?,
                Var::P(i) => *b
                    .p
                    .get(i)
                    .ok_or_else(|| Error::Expr(format!("p{} is not bound", i + 1)))?,
            },
            Expr::Neg(a) => -a.eval(b)?,
            Expr::Add(l, r) => l.eval(b)? + r.eval(b)?,
            Expr::Sub(l, r) => l.eval(b)? - r.eval(b)?,
            Expr::Mul(l, r) => l.eval(b)? * r.eval(b)?,
            Expr::Div(l, r) => l.eval(b)? / r.eval(b)?,
            Expr::Pow(l, r) => {
                let base = l.eval(b)?;
                match r.as_ref() {
                    Expr::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(*c as i32),
                    _ => base.powf(r.eval(b)?),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(b)?),
        })
    }

    /// Largest index of each variable family used, as `(max x, uses z, max p)`.
    pub fn arity(&self) -> (usize, bool, usize) {
        let mut acc = (0, false, 0);
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                match *v {
                    Var::X(i) => acc.0 = acc.0.max(i + 1),
                    Var::Z => acc.1 = true,
                    Var::P(i) => acc.2 = acc.2.max(i + 1),
                }
            }
        });
        acc
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.visit(f),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) | Expr::Div(l, r) | Expr::Pow(l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    /// Symbolic derivative with respect to `v`.
    pub fn derivative(&self, v: Var) -> Expr {
        use Expr::*;
        match self {
            Const(_) => Const(0.0),
            Var(w) => Const(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(v)),
            Add(l, r) => add(l.derivative(v), r.derivative(v)),
            Sub(l, r) => sub(l.derivative(v), r.derivative(v)),
            Mul(l, r) => add(
                mul(l.derivative(v), (**r).clone()),
                mul((**l).clone(), r.derivative(v)),
            ),
            Div(l, r) => div(
                sub(
                    mul(l.derivative(v), (**r).clone()),
                    mul((**l).clone(), r.derivative(v)),
                ),
                pow((**r).clone(), Const(2.0)),
            ),
            Pow(l, r) => {
                if let Const(c) = r.as_ref() {
                    mul(
                        mul(Const(*c), pow((**l).clone(), Const(c - 1.0))),
                        l.derivative(v),
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(r.derivative(v), Call(Func::Log, l.clone())),
                            div(mul((**r).clone(), l.derivative(v)), (**l).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.derivative(v);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Log => div(Const(1.0), (**a).clone()),
                    Func::Sqrt => div(Const(0.5), self.clone()),
                    Func::Abs => div((**a).clone(), self.clone()),
                };
                mul(outer, inner)
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
        _ if is_zero(&l) => r,
        _ if is_zero(&r) => l,
        _ => Expr::Add(Box::new(l), Box::new(r)),
    }
}

fn sub(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Const(a), Expr::Const(b)) => Expr::Const(a - b),
        _ if is_zero(&r) => l,
        _ if is_zero(&l) => neg(r),
        _ => Expr::Sub(Box::new(l), Box::new(r)),
    }
}

fn mul(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
        _ if is_zero(&l) || is_zero(&r) => Expr::Const(0.0),
        _ if is_one(&l) => r,
        _ if is_one(&r) => l,
        _ => Expr::Mul(Box::new(l), Box::new(r)),
    }
}

fn div(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        _ if is_zero(&l) => Expr::Const(0.0),
        _ if is_one(&r) => l,
        _ => Expr::Div(Box::new(l), Box::new(r)),
    }
}

fn pow(l: Expr, r: Expr) -> Expr {
    match (&l, &r) {
        _ if is_zero(&r) => Expr::Const(1.0),
        _ if is_one(&r) => l,
        _ => Expr::Pow(Box::new(l), Box::new(r)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::Z) => write!(f, "z"),
            Expr::Var(Var::P(i)) => write!(f, "p{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Sub(l, r) => write!(f, "({l} - {r})"),
            Expr::Mul(l, r) => write!(f, "({l} * {r})"),
            Expr::Div(l, r) => write!(f, "({l} / {r})"),
            Expr::Pow(l, r) => write!(f, "({l} ^ {r})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
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
                .map_err(|_| Error::Expr(format!("bad number `{s}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(e),
                    _ => Err(Error::Expr("missing `)`".into())),
                }
            }
            Some(Token::Ident(name)) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => return Err(Error::Expr(format!("`{name}` must be followed by `(`"))),
                    }
                    let arg = self.expr()?;
                    match self.next() {
                        Some(Token::RParen) => Ok(Expr::Call(func, Box::new(arg))),
                        _ => Err(Error::Expr("missing `)`".into())),
                    }
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else {
                    parse_var(&name).map(Expr::Var)
                }
            }
            Some(t) => Err(Error::Expr(format!("unexpected token {t:?}"))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }
}

fn parse_var(name: &str) -> Result<Var> {
    if name == "z" {
        return Ok(Var::Z);
    }
    let indexed = |prefix: char| -> Option<usize> {
        let rest = name.strip_prefix(prefix)?;
        let k: usize = rest.parse().ok()?;
        (k >= 1).then(|| k - 1)
    };
    if let Some(i) = indexed('x') {
        Ok(Var::X(i))
    } else if let Some(i) = indexed('p') {
        Ok(Var::P(i))
    } else {
        Err(Error::Expr(format!("unknown identifier `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_xz(src: &str, x: &[f64], z: f64) -> f64 {
        Expr::parse(src).unwrap().eval(&Bindings::xz(x, z)).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_xz("1 + 2 * 3", &[], 0.0), 7.0);
        assert_eq!(eval_xz("2 ^ 3 ^ 2", &[], 0.0), 512.0);
        assert_eq!(eval_xz("-2 ^ 2", &[], 0.0), -4.0);
        assert_eq!(eval_xz("(1 - 4) / 2 - 1", &[], 0.0), -2.5);
        assert_eq!(eval_xz("x1 * x2 + z", &[2.0, 3.0], 0.5), 6.5);
        assert!((eval_xz("cos(pi)", &[], 0.0) + 1.0).abs() < 1e-15);
        assert_eq!(eval_xz("1.5e1 + 2E-1", &[], 0.0), 15.2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(2)").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("2 $ 3").is_err());
        assert!(Expr::parse("x1").unwrap().eval(&Bindings::default()).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let srcs = [
            "sin(x1) * exp(x2) - x1^3 / (1 + x2^2)",
            "sqrt(1 + x1^2 + x2^2) * log(2 + x1)",
            "abs(x1 - 3) + x1 ^ x2 + cos(x1 * x2)",
        ];
        let x = [0.7, -0.3];
        for src in srcs {
            let e = Expr::parse(src).unwrap();
            for (k, var) in [Var::X(0), Var::X(1)].into_iter().enumerate() {
                let d = e.derivative(var).eval(&Bindings::x(&x)).unwrap();
                let step = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[k] += step;
                xm[k] -= step;
                let fd = (e.eval(&Bindings::x(&xp)).unwrap() - e.eval(&Bindings::x(&xm)).unwrap())
                    / (2.0 * step);
                assert!((d - fd).abs() < 1e-7, "{src} d/dx{}: {d} vs {fd}", k + 1);
            }
        }
    }

    #[test]
    fn arity_reports_used_variables() {
        let e = Expr::parse("x3 + z * p2").unwrap();
        assert_eq!(e.arity(), (3, true, 2));
    }
}
