//! Tiny arithmetic language for data-dependent parameter rules such as
//! `0.15 * specnorm(X0)` or `((a+1)/2) * (c * specnorm(X0))^2`.
//!
//! Grammar (`^` is right-associative and binds tighter than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'c' | 'a' | 'specnorm' '(' 'X0' ')' | '(' expr ')'
//! ```

use std::fmt;
use std::str::FromStr;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    C,
    A,
    SpecNorm,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
}

/// Values the rule variables are bound to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleEnv {
    pub c: f64,
    pub a: f64,
    /// `||X0||_2` with `X0 = A*(b)`.
    pub specnorm_x0: f64,
}

/// A parsed rule; `Display` gives back the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    src: String,
    root: Node,
}

impl Rule {
    pub fn parse(src: &str) -> Result<Self, HarnessError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Self {
            src: src.trim().to_string(),
            root,
        })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            src: format!("{v:?}"),
            root: Node::Num(v),
        }
    }

    pub fn eval(&self, env: &RuleEnv) -> f64 {
        eval(&self.root, env)
    }

    /// Whether the rule reads `specnorm(X0)`; such rules need `A*(b)` first.
    pub fn uses_specnorm(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::SpecNorm => true,
                Node::Neg(x) => walk(x),
                Node::Bin(_, l, r) => walk(l) || walk(r),
                _ => false,
            }
        }
        walk(&self.root)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl FromStr for Rule {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::parse(s)
    }
}

fn eval(n: &Node, env: &RuleEnv) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::C => env.c,
        Node::A => env.a,
        Node::SpecNorm => env.specnorm_x0,
        Node::Neg(x) => -eval(x, env),
        Node::Bin(op, l, r) => {
            let (l, r) = (eval(l, env), eval(r, env));
            match op {
                '+' => l + r,
                '-' => l - r,
                '*' => l * r,
                '/' => l / r,
                _ => l.powf(r),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, HarnessError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| HarnessError::Rule(format!("bad number '{text}' in '{src}'")))?;
            out.push(Tok::Num(v));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(ch) {
            out.push(Tok::Sym(ch));
            i += 1;
        } else {
            return Err(HarnessError::Rule(format!("unexpected '{ch}' in '{src}'")));
        }
    }
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'s str,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> HarnessError {
        HarnessError::Rule(format!("{what} at token {} in '{}'", self.pos, self.src))
    }

    fn peek_sym(&self, c: char) -> bool {
        matches!(self.tokens.get(self.pos), Some(Tok::Sym(s)) if *s == c)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), HarnessError> {
        if self.peek_sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node, HarnessError> {
        let mut lhs = self.term()?;
        while let Some(op) = ['+', '-'].into_iter().find(|&c| self.peek_sym(c)) {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, HarnessError> {
        let mut lhs = self.unary()?;
        while let Some(op) = ['*', '/'].into_iter().find(|&c| self.peek_sym(c)) {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, HarnessError> {
        if self.peek_sym('-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, HarnessError> {
        let base = self.atom()?;
        if self.peek_sym('^') {
            self.pos += 1;
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, HarnessError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(id) => match id.as_str() {
                "c" => Ok(Node::C),
                "a" => Ok(Node::A),
                "specnorm" => {
                    self.expect_sym('(')?;
                    match self.tokens.get(self.pos) {
                        Some(Tok::Ident(x)) if x == "X0" => self.pos += 1,
                        _ => return Err(self.err("specnorm takes X0")),
                    }
                    self.expect_sym(')')?;
                    Ok(Node::SpecNorm)
                }
                other => Err(HarnessError::Rule(format!("unknown name '{other}' in '{}'", self.src))),
            },
            Tok::Sym(_) => {
                self.pos -= 1;
                Err(self.err("unexpected symbol"))
            }
        }
    }
}
