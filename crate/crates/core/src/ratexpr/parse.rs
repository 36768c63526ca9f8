//! Recursive-descent parser for
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := factor factor*
//! factor := base ('^*' | '^-1')*
//! base   := letter | rational | '(' expr ')'
//! letter := [a-z][a-zA-Z0-9_]*
//! ```
//!
//! Juxtaposition is product. A leading `-` is accepted so that negative
//! scalars such as `(-1)` round-trip through rendering.

use thiserror::Error;

use super::RatExpr;
use crate::exact_arith::{int, parse_rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

pub fn parse(text: &str) -> Result<RatExpr, SyntaxError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError { position: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn starts_base(c: u8) -> bool {
        c.is_ascii_lowercase() || c.is_ascii_digit() || c == b'('
    }

    fn expr(&mut self) -> Result<RatExpr, SyntaxError> {
        let mut terms = Vec::new();
        let leading_minus = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let first = self.term()?;
        terms.push(if leading_minus { negate(first) } else { first });
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.term()?;
                    terms.push(negate(t));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().expect("one term") } else { RatExpr::sum(terms) })
    }

    fn term(&mut self) -> Result<RatExpr, SyntaxError> {
        let mut factors = vec![self.factor()?];
        while self.peek().is_some_and(Self::starts_base) {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().expect("one factor") } else { RatExpr::product(factors) })
    }

    fn factor(&mut self) -> Result<RatExpr, SyntaxError> {
        let mut e = self.base()?;
        loop {
            self.skip_ws();
            let rest = &self.src[self.pos..];
            if rest.starts_with(b"^*") {
                self.pos += 2;
                e = RatExpr::star(e);
            } else if rest.starts_with(b"^-1") {
                self.pos += 3;
                e = RatExpr::inverse(e);
            } else if rest.starts_with(b"^") {
                return Err(self.error("expected `^*` or `^-1`"));
            } else {
                return Ok(e);
            }
        }
    }

    fn base(&mut self) -> Result<RatExpr, SyntaxError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_lowercase() => {
                let start = self.pos;
                self.pos += 1;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                Ok(RatExpr::atom(name))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                let digits = |p: &mut Self| {
                    while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                        p.pos += 1;
                    }
                };
                digits(self);
                if self.src.get(self.pos) == Some(&b'/') {
                    self.pos += 1;
                    let d = self.pos;
                    digits(self);
                    if d == self.pos {
                        return Err(self.error("expected denominator"));
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let c = parse_rational(text).ok_or_else(|| SyntaxError {
                    position: start,
                    message: format!("invalid rational `{text}`"),
                })?;
                Ok(RatExpr::scalar(c))
            }
            Some(_) => Err(self.error("expected a letter, a number or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}

fn negate(e: RatExpr) -> RatExpr {
    match e.node() {
        super::Node::Scalar(c) => RatExpr::scalar(-c),
        super::Node::Product(fs) => {
            let mut v = vec![RatExpr::scalar(int(-1))];
            v.extend(fs.iter().cloned());
            RatExpr::product(v)
        }
        _ => RatExpr::product(vec![RatExpr::scalar(int(-1)), e]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::q;

    fn a(n: &str) -> RatExpr {
        RatExpr::atom(n)
    }

    #[test]
    fn parses_code_expression() {
        assert_eq!(
            parse("a + b (d)^* c").unwrap(),
            RatExpr::sum(vec![a("a"), RatExpr::product(vec![a("b"), RatExpr::star(a("d")), a("c")])])
        );
        assert_eq!(
            parse("(1 + b (d)^*)^-1").unwrap(),
            RatExpr::inverse(RatExpr::sum(vec![
                RatExpr::one(),
                RatExpr::product(vec![a("b"), RatExpr::star(a("d"))])
            ]))
        );
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("a + b (").unwrap_err();
        assert_eq!(err.position, 7);
        assert!(parse("a +").is_err());
        assert!(parse("a ^2").is_err());
        assert!(parse("A").is_err());
        assert!(parse("a b)").is_err());
    }

    #[test]
    fn scalars_and_signs() {
        assert_eq!(parse("3/4").unwrap(), RatExpr::scalar(q(3, 4)));
        assert_eq!(parse("(-1)").unwrap(), RatExpr::scalar(int(-1)));
        assert_eq!(
            parse("((1) + (-1))^-1").unwrap(),
            RatExpr::inverse(RatExpr::sum(vec![RatExpr::one(), RatExpr::scalar(int(-1))]))
        );
        assert_eq!(
            parse("a - b c").unwrap(),
            RatExpr::sum(vec![a("a"), RatExpr::product(vec![RatExpr::scalar(int(-1)), a("b"), a("c")])])
        );
    }

    #[test]
    fn letters_with_indices() {
        assert_eq!(parse("a_12 a_21").unwrap(), RatExpr::product(vec![a("a_12"), a("a_21")]));
        assert_eq!(parse("(d)^*^*").unwrap(), RatExpr::star(RatExpr::star(a("d"))));
    }
}
