//! A small arithmetic expression language for user-defined flow maps, jump
//! maps, envelopes and comparison functions.
//!
//! Supported syntax: numbers, `+ - * / ^`, unary minus, parentheses, the
//! constant `pi`, and the functions `exp log sqrt sin cos abs floor ceil`
//! (one argument) and `min max pow` (two arguments). Which variables are in
//! scope depends on the [`Scope`] the expression is compiled against: `t`,
//! `x1..xn` / `x_1..x_n`, `u1..um` / `u_1..u_m` for system maps, `r` for
//! comparison functions and `r`, `s` for KL functions.

use crate::error::{Error, Result};

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// `t`, `x_i` (1-based, up to `dim_x`), `u_j` (1-based, up to `dim_u`).
    System { dim_x: usize, dim_u: usize },
    /// `r` only.
    Radial,
    /// `r` and `s`.
    TwoArg,
}

/// Values bound to the variables during evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub u: &'a [f64],
    pub r: f64,
    pub s: f64,
}

impl<'a> Bindings<'a> {
    pub fn system(t: f64, x: &'a [f64], u: &'a [f64]) -> Self {
        Bindings {
            t,
            x,
            u,
            ..Default::default()
        }
    }

    pub fn radial(r: f64) -> Self {
        Bindings {
            r,
            ..Default::default()
        }
    }

    pub fn two_arg(r: f64, s: f64) -> Self {
        Bindings {
            r,
            s,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    T,
    X(usize),
    U(usize),
    R,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unary {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Floor,
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Call(Unary, Box<Node>),
    Bin(Binary, Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, b: &Bindings<'_>) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(v) => match *v {
                Var::T => b.t,
                Var::X(i) => b.x[i],
                Var::U(j) => b.u[j],
                Var::R => b.r,
                Var::S => b.s,
            },
            Node::Neg(a) => -a.eval(b),
            Node::Call(f, a) => {
                let v = a.eval(b);
                match f {
                    Unary::Exp => v.exp(),
                    Unary::Log => v.ln(),
                    Unary::Sqrt => v.sqrt(),
                    Unary::Sin => v.sin(),
                    Unary::Cos => v.cos(),
                    Unary::Abs => v.abs(),
                    Unary::Floor => v.floor(),
                    Unary::Ceil => v.ceil(),
                }
            }
            Node::Bin(op, l, r) => {
                let (l, r) = (l.eval(b), r.eval(b));
                match op {
                    Binary::Add => l + r,
                    Binary::Sub => l - r,
                    Binary::Mul => l * r,
                    Binary::Div => l / r,
                    Binary::Pow => pow(l, r),
                    Binary::Min => l.min(r),
                    Binary::Max => l.max(r),
                }
            }
        }
    }
}

fn pow(base: f64, exp: f64) -> f64 {
    if exp.fract() == 0.0 && exp.abs() <= i32::MAX as f64 {
        base.powi(exp as i32)
    } else {
        base.powf(exp)
    }
}

/// A parsed and scope-checked expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl Expr {
    pub fn compile(source: &str, scope: Scope) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            scope,
            source,
        };
        let root = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Expr {
            source: source.to_string(),
            root,
        })
    }

    pub fn eval(&self, bindings: &Bindings<'_>) -> f64 {
        self.root.eval(bindings)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value = text
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{text}` at {start} in `{src}`")))?;
            out.push((start, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Expr(format!(
                "unexpected character `{c}` at {i} in `{src}`"
            )));
        }
    }
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    scope: Scope,
    source: &'s str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let at = self
            .tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.source.len());
        Error::Expr(format!("{msg} at {at} in `{}`", self.source))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if op == '+' { Binary::Add } else { Binary::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { Binary::Mul } else { Binary::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Binary::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Op(_) => {
                self.pos -= 1;
                Err(self.error("expected a value"))
            }
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    self.pos += 1;
                    self.call(&name)
                } else {
                    self.variable(&name)
                }
            }
        }
    }

    fn call(&mut self, name: &str) -> Result<Node> {
        let mut args = vec![self.expr()?];
        while self.peek_op() == Some(',') {
            self.pos += 1;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        let unary = match name {
            "exp" => Some(Unary::Exp),
            "log" | "ln" => Some(Unary::Log),
            "sqrt" => Some(Unary::Sqrt),
            "sin" => Some(Unary::Sin),
            "cos" => Some(Unary::Cos),
            "abs" => Some(Unary::Abs),
            "floor" => Some(Unary::Floor),
            "ceil" => Some(Unary::Ceil),
            _ => None,
        };
        if let Some(f) = unary {
            if args.len() != 1 {
                return Err(self.error(&format!("`{name}` takes one argument")));
            }
            return Ok(Node::Call(f, Box::new(args.pop().unwrap())));
        }
        let binary = match name {
            "min" => Binary::Min,
            "max" => Binary::Max,
            "pow" => Binary::Pow,
            _ => return Err(self.error(&format!("unknown function `{name}`"))),
        };
        if args.len() < 2 || (binary == Binary::Pow && args.len() != 2) {
            return Err(self.error(&format!("`{name}` takes two arguments")));
        }
        // min/max fold over any number of arguments
        let mut it = args.into_iter();
        let mut acc = it.next().unwrap();
        for next in it {
            acc = Node::Bin(binary, Box::new(acc), Box::new(next));
        }
        Ok(acc)
    }

    fn variable(&self, name: &str) -> Result<Node> {
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        let var = match (self.scope, name) {
            (Scope::System { .. }, "t") => Var::T,
            (Scope::System { dim_x, dim_u }, _) => {
                let (kind, idx) = indexed_name(name)
                    .ok_or_else(|| self.unknown(name))?;
                match kind {
                    'x' if (1..=dim_x).contains(&idx) => Var::X(idx - 1),
                    'u' if (1..=dim_u).contains(&idx) => Var::U(idx - 1),
                    _ => return Err(self.unknown(name)),
                }
            }
            (Scope::Radial | Scope::TwoArg, "r") => Var::R,
            (Scope::TwoArg, "s") => Var::S,
            _ => return Err(self.unknown(name)),
        };
        Ok(Node::Var(var))
    }

    fn unknown(&self, name: &str) -> Error {
        Error::Expr(format!(
            "unknown variable `{name}` in `{}` (scope {:?})",
            self.source, self.scope
        ))
    }
}

/// Splits `x3` / `x_3` into (`'x'`, 3).
fn indexed_name(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let kind = chars.next()?;
    let rest = chars.as_str();
    let digits = rest.strip_prefix('_').unwrap_or(rest);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    Some((kind, digits.parse().ok()?))
}
