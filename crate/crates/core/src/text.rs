//! Shared recursive-descent parser for the series and operator text formats.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary ('*' unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' int)?
//! primary := int ('/' int)? | ident | '(' expr ')'
//! ```
//!
//! Evaluation is delegated to an [`Algebra`] so the same syntax feeds both
//! [`crate::tate::TateSeries`] and [`crate::diffop::DiffOp`].

use crate::error::{Error, Result};
use crate::padic::Scalar;
use num_bigint::BigInt;

pub(crate) trait Algebra {
    type Value;
    fn scalar(&self, c: Scalar) -> Result<Self::Value>;
    fn ident(&self, name: &str) -> Result<Self::Value>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn neg(&self, a: &Self::Value) -> Result<Self::Value>;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
}

pub(crate) struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!(
            "{msg} at offset {} in {:?}",
            self.pos,
            String::from_utf8_lossy(self.src)
        ))
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn parse_all<A: Algebra>(mut self, alg: &A) -> Result<A::Value> {
        if self.peek().is_none() {
            return Err(self.err("empty expression"));
        }
        let v = self.expr(alg)?;
        if self.peek().is_some() {
            return Err(self.err("trailing input"));
        }
        Ok(v)
    }

    fn expr<A: Algebra>(&mut self, alg: &A) -> Result<A::Value> {
        let mut acc = self.term(alg)?;
        loop {
            if self.eat(b'+') {
                let t = self.term(alg)?;
                acc = alg.add(&acc, &t)?;
            } else if self.eat(b'-') {
                let t = self.term(alg)?;
                acc = alg.add(&acc, &alg.neg(&t)?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term<A: Algebra>(&mut self, alg: &A) -> Result<A::Value> {
        let mut acc = self.unary(alg)?;
        while self.eat(b'*') {
            let f = self.unary(alg)?;
            acc = alg.mul(&acc, &f)?;
        }
        Ok(acc)
    }

    fn unary<A: Algebra>(&mut self, alg: &A) -> Result<A::Value> {
        if self.eat(b'-') {
            let v = self.unary(alg)?;
            return alg.neg(&v);
        }
        self.power(alg)
    }

    fn power<A: Algebra>(&mut self, alg: &A) -> Result<A::Value> {
        let base = self.primary(alg)?;
        if self.eat(b'^') {
            let e = self.integer()?;
            let e: u32 = e
                .try_into()
                .map_err(|_| self.err("exponent out of range"))?;
            let mut acc = alg.scalar(Scalar::from_integer(BigInt::from(1)))?;
            for _ in 0..e {
                acc = alg.mul(&acc, &base)?;
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(s.parse().expect("digits parse"))
    }

    fn primary<A: Algebra>(&mut self, alg: &A) -> Result<A::Value> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr(alg)?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                // a '/' directly followed by digits is part of the rational literal
                let save = self.pos;
                if self.eat(b'/') {
                    if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        let d = self.integer()?;
                        if d == BigInt::from(0) {
                            return Err(self.err("zero denominator"));
                        }
                        return alg.scalar(Scalar::new(n, d));
                    }
                    self.pos = save;
                    return Err(self.err("division is only allowed inside rational literals"));
                }
                alg.scalar(Scalar::from_integer(n))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii ident");
                alg.ident(name)
            }
            _ => Err(self.err("unexpected token")),
        }
    }
}

/// Default variable names: `x`, `x,y`, `x,y,z`, then `x1..xm`.
pub fn default_var_names(m: usize) -> Vec<String> {
    match m {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..=m).map(|i| format!("x{i}")).collect(),
    }
}
