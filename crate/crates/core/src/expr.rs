//! Minimal complex-valued expression evaluator for coefficient fields.
//!
//! Grammar (recursive descent):
//!   expr   := term (('+'|'-') term)*
//!   term   := factor (('*'|'/') factor)*
//!   factor := unary ('^' factor)?          (right associative)
//!   unary  := ('-'|'+')* atom
//!   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//!
//! Identifiers resolve to the variables supplied at evaluation time or to
//! the built-ins `i`, `pi`, `e`. `bump(t)` is the standard C-infinity bump
//! exp(1 - 1/(1-t^2)) on |t| < 1, zero outside.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(String),
    Unary(char, Box<Node>),
    Binary(char, Box<Node>, Box<Node>),
    Call(String, Vec<Node>),
}

/// A parsed expression, evaluated with a variable table.
#[derive(Clone)]
pub struct Expr {
    root: Node,
    src: String,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.src)
    }
}

pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            src,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("expression `{}` at offset {}: {}", self.src, self.pos, msg))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn bump_char(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // unary minus binds looser than `^`, so -2^2 = -(2^2)
    fn factor(&mut self) -> Result<Node> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Unary('-', Box::new(self.factor()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some('^') = self.peek() {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Node::Binary('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.bump_char() {
                    Some(')') => Ok(inner),
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let name = self.ident();
                if let Some('(') = self.peek() {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while let Some(',') = self.peek() {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    match self.bump_char() {
                        Some(')') => Ok(Node::Call(name, args)),
                        _ => Err(self.err("expected `)` after arguments")),
                    }
                } else {
                    Ok(Node::Var(name))
                }
            }
            Some(c) => Err(self.err(&format!("unexpected character `{c}`"))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_ascii_digit() || c == '.' {
                self.pos += 1;
            } else if (c == 'e' || c == 'E')
                && self.pos > start
                && self
                    .chars
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == '+' || d == '-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>()
            .map(Node::Num)
            .map_err(|_| self.err(&format!("bad number `{text}`")))
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        self.chars[start..self.pos].iter().collect()
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser::new(src);
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Expr {
            root,
            src: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Free variables referenced by the expression (built-ins excluded).
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_vars(&self.root, &mut out);
        out
    }

    pub fn eval(&self, vars: &[(&str, C64)]) -> Result<C64> {
        eval_node(&self.root, vars, &self.src)
    }
}

fn collect_vars(node: &Node, out: &mut BTreeSet<String>) {
    match node {
        Node::Var(name) => {
            if !matches!(name.as_str(), "i" | "pi" | "e") {
                out.insert(name.clone());
            }
        }
        Node::Unary(_, a) => collect_vars(a, out),
        Node::Binary(_, a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
        Node::Call(_, args) => args.iter().for_each(|a| collect_vars(a, out)),
        Node::Num(_) => {}
    }
}

fn eval_node(node: &Node, vars: &[(&str, C64)], src: &str) -> Result<C64> {
    let bad = |msg: String| Error::Config(format!("expression `{src}`: {msg}"));
    Ok(match node {
        Node::Num(v) => C64::new(*v, 0.0),
        Node::Var(name) => match name.as_str() {
            "i" => C64::new(0.0, 1.0),
            "pi" => C64::new(std::f64::consts::PI, 0.0),
            "e" => C64::new(std::f64::consts::E, 0.0),
            _ => vars
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(format!("unknown variable `{name}`")))?,
        },
        Node::Unary('-', a) => -eval_node(a, vars, src)?,
        Node::Unary(op, _) => return Err(bad(format!("unknown unary `{op}`"))),
        Node::Binary(op, a, b) => {
            let (x, y) = (eval_node(a, vars, src)?, eval_node(b, vars, src)?);
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                '/' => x / y,
                '^' => {
                    if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() <= 64.0 {
                        x.powi(y.re as i32)
                    } else {
                        x.powc(y)
                    }
                }
                _ => return Err(bad(format!("unknown operator `{op}`"))),
            }
        }
        Node::Call(name, args) => {
            let a: Vec<C64> = args
                .iter()
                .map(|n| eval_node(n, vars, src))
                .collect::<Result<_>>()?;
            let one = |f: fn(C64) -> C64| -> Result<C64> {
                if a.len() == 1 {
                    Ok(f(a[0]))
                } else {
                    Err(bad(format!("`{name}` takes one argument")))
                }
            };
            match name.as_str() {
                "sin" => one(|z| z.sin())?,
                "cos" => one(|z| z.cos())?,
                "tan" => one(|z| z.tan())?,
                "sinh" => one(|z| z.sinh())?,
                "cosh" => one(|z| z.cosh())?,
                "exp" => one(|z| z.exp())?,
                "log" => one(|z| z.ln())?,
                "sqrt" => one(|z| z.sqrt())?,
                "abs" => one(|z| C64::new(z.norm(), 0.0))?,
                "re" => one(|z| C64::new(z.re, 0.0))?,
                "im" => one(|z| C64::new(z.im, 0.0))?,
                "conj" => one(|z| z.conj())?,
                "bump" => {
                    if a.len() != 1 {
                        return Err(bad("`bump` takes one argument".into()));
                    }
                    if a[0].im != 0.0 {
                        return Err(bad("`bump` expects a real argument".into()));
                    }
                    C64::new(bump(a[0].re), 0.0)
                }
                _ => return Err(bad(format!("unknown function `{name}`"))),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, vars: &[(&str, C64)]) -> C64 {
        Expr::parse(src).unwrap().eval(vars).unwrap()
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2*3", &[]), C64::new(7.0, 0.0));
        assert_eq!(ev("(1+2)*3", &[]), C64::new(9.0, 0.0));
        assert_eq!(ev("2^3^2", &[]), C64::new(512.0, 0.0));
        assert_eq!(ev("-2^2", &[]), C64::new(-4.0, 0.0));
    }

    #[test]
    fn complex_and_functions() {
        let z = ev("4 + i*bump((x-0.5)/0.3)", &[("x", C64::new(0.5, 0.0))]);
        assert!((z - C64::new(4.0, 1.0)).norm() < 1e-15);
        let z = ev("exp(i*pi)", &[]);
        assert!((z + 1.0).norm() < 1e-15);
        assert_eq!(ev("bump(1.5)", &[]), C64::new(0.0, 0.0));
    }

    #[test]
    fn variables_are_reported() {
        let e = Expr::parse("n1 + i*n2/x").unwrap();
        let vars: Vec<_> = e.variables().into_iter().collect();
        assert_eq!(vars, vec!["n1", "n2", "x"]);
    }

    #[test]
    fn unknown_variable_errors() {
        assert!(Expr::parse("y + 1").unwrap().eval(&[("x", C64::new(0.0, 0.0))]).is_err());
    }
}
