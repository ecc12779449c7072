use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;

use super::{CountingPredicate, Cube};

/// A DSL error at a byte offset of the source text.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("predicate error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Op {
    Ge,
    Le,
    Eq,
}

#[derive(Debug)]
enum Expr {
    Const(bool),
    Atom(usize, Op, u32),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    sigma: &'a [String],
}

impl<'a> Parser<'a> {
    fn err<T>(&self, position: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.rest().chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.eat("||") {
            let rhs = self.and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat("&&") {
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let e = self.or()?;
            if !self.eat(")") {
                return self.err(self.pos, "expected `)`");
            }
            return Ok(e);
        }
        self.atom()
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let word = self.word();
        match word {
            "" => return self.err(start, "expected a comparison, `!` or `(`"),
            "true" => return Ok(Expr::Const(true)),
            "false" => return Ok(Expr::Const(false)),
            _ => {}
        }
        let Some(name) = word.strip_prefix('x') else {
            return self.err(start, format!("expected a variable `x<symbol>`, found `{word}`"));
        };
        let index = self.sigma.iter().position(|s| s == name).or_else(|| {
            let bare = name.strip_prefix('_')?;
            self.sigma.iter().position(|s| s == bare)
        });
        let Some(index) = index else {
            return self.err(start, format!("unknown input symbol `{name}`"));
        };
        self.skip_ws();
        let op_pos = self.pos;
        let op = if self.eat(">=") {
            Op::Ge
        } else if self.eat("<=") {
            Op::Le
        } else if self.eat("==") || self.eat("=") {
            Op::Eq
        } else {
            return self.err(op_pos, "expected `>=`, `<=` or `=`");
        };
        self.skip_ws();
        let num_pos = self.pos;
        let digits = self.word();
        match digits.parse::<u32>() {
            Ok(c) => Ok(Expr::Atom(index, op, c)),
            Err(_) => self.err(num_pos, format!("expected a nonnegative integer, found `{digits}`")),
        }
    }
}

fn lower(e: &Expr, arity: usize) -> CountingPredicate {
    match e {
        Expr::Const(b) => CountingPredicate::always(arity, *b),
        Expr::Atom(i, op, c) => {
            let mut cube = Cube::full(arity);
            match op {
                Op::Ge => cube.lower[*i] = *c,
                Op::Le => cube.upper[*i] = Some(*c),
                Op::Eq => {
                    cube.lower[*i] = *c;
                    cube.upper[*i] = Some(*c);
                }
            }
            CountingPredicate::new(arity, vec![cube])
        }
        Expr::Not(a) => lower(a, arity).complement(),
        Expr::And(a, b) => lower(a, arity).intersection(&lower(b, arity)),
        Expr::Or(a, b) => lower(a, arity).union(&lower(b, arity)),
    }
}

/// Parses the predicate DSL over the input alphabet `sigma` and normalizes
/// it to a union of cubes.
///
/// ```text
/// expr  := and ("||" and)*
/// and   := unary ("&&" unary)*
/// unary := "!" unary | "(" expr ")" | atom
/// atom  := "x" SYMBOL (">=" | "<=" | "=") INT | "true" | "false"
/// ```
pub fn parse_predicate(text: &str, sigma: &[String]) -> Result<CountingPredicate, ParseError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        sigma,
    };
    let expr = p.or()?;
    p.skip_ws();
    if p.pos != text.len() {
        return p.err(p.pos, "unexpected trailing input");
    }
    let mut pred = lower(&expr, sigma.len());
    pred.source = Some(text.to_string());
    Ok(pred)
}
