//! Text grammar for expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right associative
//! atom    := number | name | ('log' | 'exp') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Default variable names are `x1 .. xn` (one-based) with the aliases
//! `x`, `y`, `z` for `x1`, `x2`, `x3`. The constants `pi` and `e` are
//! predefined unless shadowed by a caller-supplied variable name. A power
//! whose exponent contains variables is rewritten as `exp(b * log(a))`.

use super::DefinableExpr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

/// Parses with the default variable names.
pub fn parse(text: &str) -> Result<DefinableExpr, ParseError> {
    Parser::new(text, None).parse_all()
}

/// Parses with `names[i]` bound to variable `i`. The default `x1..xn`
/// names stay available.
pub fn parse_with_vars(text: &str, names: &[&str]) -> Result<DefinableExpr, ParseError> {
    Parser::new(text, Some(names)).parse_all()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    names: Option<&'a [&'a str]>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, names: Option<&'a [&'a str]>) -> Self {
        Parser { src, pos: 0, names }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { offset: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn parse_all(mut self) -> Result<DefinableExpr, ParseError> {
        let e = self.expr()?;
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<DefinableExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = lhs + self.term()?;
            } else if self.eat('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<DefinableExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<DefinableExpr, ParseError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(match inner.as_constant() {
                Some(c) => DefinableExpr::constant(-c),
                None => -inner,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<DefinableExpr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            let exponent = match constant_fold(&exponent) {
                Some(c) => DefinableExpr::constant(c),
                None => exponent,
            };
            return Ok(base.pow_expr(&exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<DefinableExpr, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.name(),
            Some(c) => self.err(format!("unexpected character '{c}'")),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<DefinableExpr, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        match self.src[start..i].parse::<f64>() {
            Ok(v) => Ok(DefinableExpr::constant(v)),
            Err(_) => {
                self.pos = start;
                self.err(format!("invalid number '{}'", &self.src[start..i]))
            }
        }
    }

    fn name(&mut self) -> Result<DefinableExpr, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
            i += 1;
        }
        let ident = &self.src[start..i];
        self.pos = i;
        if let Some(k) = self.names.and_then(|ns| ns.iter().position(|n| *n == ident)) {
            return Ok(DefinableExpr::var(k));
        }
        match ident {
            "log" | "ln" | "exp" => {
                if !self.eat('(') {
                    return self.err(format!("expected '(' after {ident}"));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(if ident == "exp" { arg.exp() } else { arg.ln() })
            }
            "pi" => Ok(DefinableExpr::constant(std::f64::consts::PI)),
            "e" => Ok(DefinableExpr::constant(std::f64::consts::E)),
            "x" if self.names.is_none() => Ok(DefinableExpr::var(0)),
            "y" if self.names.is_none() => Ok(DefinableExpr::var(1)),
            "z" if self.names.is_none() => Ok(DefinableExpr::var(2)),
            _ => {
                if let Some(digits) = ident.strip_prefix('x') {
                    if let Ok(k) = digits.parse::<usize>() {
                        if k >= 1 && !digits.starts_with('0') {
                            return Ok(DefinableExpr::var(k - 1));
                        }
                    }
                }
                self.pos = start;
                self.err(format!("unknown name '{ident}'"))
            }
        }
    }
}

fn constant_fold(e: &DefinableExpr) -> Option<f64> {
    if e.arity() == 0 {
        e.eval(&[]).ok()
    } else {
        None
    }
}
