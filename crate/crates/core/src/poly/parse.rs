//! Recursive-descent parser for the polynomial grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := coeff | var ('^' uint)? | '(' expr ')' | '-' factor
//! coeff  := int | int '/' posint
//! var    := [A-Za-z_][A-Za-z0-9_]*
//! ```

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{Monomial, PolyError, Polynomial, Rational, VariableOrder};

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Int(&'a str),
    Decimal(&'a str),
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Tok<'a>, usize), PolyError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        let single = |t| Ok((t, start));
        self.pos += 1;
        match b {
            b'+' => single(Tok::Plus),
            b'-' => single(Tok::Minus),
            b'*' => single(Tok::Star),
            b'/' => single(Tok::Slash),
            b'^' => single(Tok::Caret),
            b'(' => single(Tok::LParen),
            b')' => single(Tok::RParen),
            b'0'..=b'9' => {
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos + 1 < bytes.len() && bytes[self.pos] == b'.' && bytes[self.pos + 1].is_ascii_digit() {
                    self.pos += 1;
                    while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    return Ok((Tok::Decimal(&self.src[start..self.pos]), start));
                }
                Ok((Tok::Int(&self.src[start..self.pos]), start))
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
                    self.pos += 1;
                }
                Ok((Tok::Ident(&self.src[start..self.pos]), start))
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                Err(PolyError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                })
            }
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: Tok<'a>,
    offset: usize,
    order: &'a Arc<VariableOrder>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, order: &'a Arc<VariableOrder>) -> Result<Self, PolyError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (current, offset) = lexer.next_token()?;
        Ok(Self {
            lexer,
            current,
            offset,
            order,
        })
    }

    fn bump(&mut self) -> Result<(), PolyError> {
        let (t, o) = self.lexer.next_token()?;
        self.current = t;
        self.offset = o;
        Ok(())
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, PolyError> {
        Err(PolyError::Syntax {
            offset: self.offset,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.term()?;
        loop {
            match self.current {
                Tok::Plus => {
                    self.bump()?;
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump()?;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut acc = self.factor()?;
        while self.current == Tok::Star {
            self.bump()?;
            acc = &acc * &self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Polynomial, PolyError> {
        match self.current.clone() {
            Tok::Int(text) => {
                self.bump()?;
                let num: BigInt = text.parse().expect("lexer yields digits");
                let value = if self.current == Tok::Slash {
                    self.bump()?;
                    let Tok::Int(den_text) = self.current else {
                        return self.syntax("expected a positive integer denominator");
                    };
                    let den: BigInt = den_text.parse().expect("lexer yields digits");
                    if den.is_zero() {
                        return self.syntax("denominator must be positive");
                    }
                    self.bump()?;
                    Rational::new(num, den)
                } else {
                    Rational::from_integer(num)
                };
                Ok(Polynomial::constant(self.order, value))
            }
            Tok::Decimal(_) => self.syntax("decimal literals are not supported; use a fraction"),
            Tok::Ident(name) => {
                let start = self.offset;
                let index = self.order.index_of(name).ok_or_else(|| PolyError::UnknownVariable {
                    name: name.to_string(),
                    offset: start,
                })?;
                self.bump()?;
                let mut exponent = 1u32;
                if self.current == Tok::Caret {
                    self.bump()?;
                    exponent = self.exponent()?;
                }
                Ok(Polynomial::from_terms(
                    self.order,
                    [(Monomial::var(index, exponent), Rational::one())],
                ))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                if self.current != Tok::RParen {
                    return self.syntax("expected `)`");
                }
                self.bump()?;
                Ok(inner)
            }
            Tok::Minus => {
                self.bump()?;
                Ok(-self.factor()?)
            }
            Tok::End => self.syntax("unexpected end of input"),
            other => self.syntax(format!("unexpected token {other:?}")),
        }
    }

    fn exponent(&mut self) -> Result<u32, PolyError> {
        let offset = self.offset;
        let bad = |text: &str| PolyError::BadExponent {
            offset,
            text: text.to_string(),
        };
        match self.current.clone() {
            Tok::Int(text) => {
                let e = text.parse::<u32>().map_err(|_| bad(text))?;
                self.bump()?;
                Ok(e)
            }
            Tok::Decimal(text) | Tok::Ident(text) => Err(bad(text)),
            Tok::Minus => Err(bad("-")),
            Tok::End => Err(bad("")),
            other => Err(bad(&format!("{other:?}"))),
        }
    }
}

/// Parses `text` into a canonical polynomial over `order`.
pub fn parse_polynomial(text: &str, order: &Arc<VariableOrder>) -> Result<Polynomial, PolyError> {
    let mut parser = Parser::new(text, order)?;
    let p = parser.expr()?;
    if parser.current != Tok::End {
        return parser.syntax("trailing input");
    }
    Ok(p)
}
