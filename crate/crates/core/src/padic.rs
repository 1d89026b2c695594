//! Exact scalars over `Q_p`, realized as rationals with an on-demand `p`-adic valuation.
//!
//! Every norm in the crate is carried in `log_p` form: `|q| = p^{-v_p(q)}` is stored
//! as the integer `-v_p(q)`, with [`LogNorm::NegInf`] standing for the norm of zero.

use std::fmt;
use std::ops::Add;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Elements of the base field.
pub type Scalar = BigRational;

/// A validated rational prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || !is_prime(p) {
            return Err(Error::Config(format!("p = {p} is not prime")));
        }
        Ok(Prime(p))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn as_scalar(self) -> Scalar {
        Scalar::from_integer(BigInt::from(self.0))
    }

    /// `p^k` as an exact scalar; negative `k` gives `p^{-|k|}`.
    pub fn pow(self, k: i64) -> Scalar {
        let base = BigInt::from(self.0).pow(k.unsigned_abs() as u32);
        if k >= 0 {
            Scalar::from_integer(base)
        } else {
            Scalar::new(BigInt::one(), base)
        }
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Ambient configuration: the prime (with uniformizer `pi = p`) and the truncation caps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalField {
    pub prime: Prime,
    /// Maximal total degree of stored series.
    pub deg_cap: usize,
    /// Maximal operator order.
    pub op_cap: usize,
    /// Largest level `n` for which level norms are evaluated.
    pub n_max: u32,
}

impl GlobalField {
    pub fn new(p: u64, deg_cap: usize, op_cap: usize, n_max: u32) -> Result<Self> {
        let prime = Prime::new(p)?;
        if deg_cap == 0 || op_cap == 0 || n_max == 0 {
            return Err(Error::Config(
                "degree cap, operator cap and n_max must all be at least 1".into(),
            ));
        }
        Ok(GlobalField {
            prime,
            deg_cap,
            op_cap,
            n_max,
        })
    }

    /// Default desk-scale configuration: `p = 5, D = 32, D_op = 16, n_max = 4`.
    pub fn default_desk() -> Self {
        GlobalField::new(5, 32, 16, 4).expect("valid defaults")
    }

    pub fn p(&self) -> u64 {
        self.prime.get()
    }

    pub fn uniformizer(&self) -> Scalar {
        self.prime.as_scalar()
    }

    pub fn with_deg_cap(&self, deg_cap: usize) -> Self {
        GlobalField {
            deg_cap,
            ..self.clone()
        }
    }

    pub fn with_op_cap(&self, op_cap: usize) -> Self {
        GlobalField {
            op_cap,
            ..self.clone()
        }
    }
}

/// `v_p` of a scalar; [`Valuation::Infinity`] sorts above every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }
}

impl Add for Valuation {
    type Output = Valuation;
    fn add(self, rhs: Valuation) -> Valuation {
        match (self, rhs) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinity,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "+inf"),
        }
    }
}

/// A norm in `log_p` form. `NegInf` is the norm of zero and sorts below everything.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum LogNorm {
    #[default]
    NegInf,
    Finite(i64),
}

impl LogNorm {
    pub fn finite(self) -> Option<i64> {
        match self {
            LogNorm::Finite(v) => Some(v),
            LogNorm::NegInf => None,
        }
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, LogNorm::NegInf)
    }

    /// Shift by an integer weight; `NegInf` is absorbing.
    pub fn shift(self, w: i64) -> LogNorm {
        match self {
            LogNorm::Finite(v) => LogNorm::Finite(v + w),
            LogNorm::NegInf => LogNorm::NegInf,
        }
    }
}

impl From<Valuation> for LogNorm {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Finite(v) => LogNorm::Finite(-v),
            Valuation::Infinity => LogNorm::NegInf,
        }
    }
}

impl Add for LogNorm {
    type Output = LogNorm;
    fn add(self, rhs: LogNorm) -> LogNorm {
        match (self, rhs) {
            (LogNorm::Finite(a), LogNorm::Finite(b)) => LogNorm::Finite(a + b),
            _ => LogNorm::NegInf,
        }
    }
}

impl fmt::Display for LogNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogNorm::Finite(v) => write!(f, "{v}"),
            LogNorm::NegInf => write!(f, "-inf"),
        }
    }
}

impl Serialize for LogNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LogNorm::Finite(v) => s.serialize_i64(*v),
            LogNorm::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for LogNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(LogNorm::Finite(v)),
            Raw::Str(s) if s == "-inf" => Ok(LogNorm::NegInf),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad log-norm {s:?}"))),
        }
    }
}

fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.abs();
    let mut k = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return k;
        }
        n = q;
        k += 1;
    }
}

/// `v_p(q)`: the exponent with `q = p^v u`, `u` a `p`-adic unit.
pub fn valuation(q: &Scalar, p: u64) -> Valuation {
    if q.is_zero() {
        return Valuation::Infinity;
    }
    Valuation::Finite(int_valuation(q.numer(), p) - int_valuation(q.denom(), p))
}

/// `log_p |q| = -v_p(q)`.
pub fn log_norm(q: &Scalar, p: u64) -> LogNorm {
    valuation(q, p).into()
}

/// `v_p(k!)` by Legendre's formula.
pub fn factorial_valuation(k: u64, p: u64) -> u64 {
    let mut total = 0;
    let mut pk = p;
    loop {
        let t = k / pk;
        if t == 0 {
            return total;
        }
        total += t;
        match pk.checked_mul(p) {
            Some(next) => pk = next,
            None => return total,
        }
    }
}

/// Image of a `p`-integral scalar in `F_p`; `None` when `v_p(q) < 0`.
pub fn residue(q: &Scalar, p: u64) -> Option<u64> {
    if q.is_zero() {
        return Some(0);
    }
    if let Valuation::Finite(v) = valuation(q, p) {
        if v < 0 {
            return None;
        }
        if v > 0 {
            return Some(0);
        }
    }
    let pb = BigInt::from(p);
    let num = q.numer().mod_floor(&pb).to_u64()?;
    let den = q.denom().mod_floor(&pb).to_u64()?;
    Some(num * inv_mod(den, p) % p)
}

pub(crate) fn inv_mod(a: u64, p: u64) -> u64 {
    // Fermat; p is small.
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = (result as u128 * base as u128 % p as u128) as u64;
        }
        base = (base as u128 * base as u128 % p as u128) as u64;
        e >>= 1;
    }
    result
}

pub fn scalar_from_i64(n: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(n))
}

pub fn binomial(n: u64, k: u64) -> Scalar {
    if k > n {
        return Scalar::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Scalar::from_integer(acc)
}

/// Parse `"3"`, `"-1/5"`, `" 2 / 7 "`.
pub fn parse_scalar(s: &str) -> Result<Scalar> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational {s:?}"));
    let parse_int = |t: &str| t.trim().parse::<BigInt>().map_err(|_| bad());
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse_int(d)?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(Scalar::new(parse_int(n)?, d))
        }
        None => Ok(Scalar::from_integer(parse_int(s)?)),
    }
}

/// Exact `"num/den"` rendering (`"num"` when the denominator is one).
pub fn format_scalar(q: &Scalar) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn is_negative(q: &Scalar) -> bool {
    q.numer().sign() == Sign::Minus
}

/// Serde adapter storing scalars as `"num/den"` strings.
pub mod serde_scalar {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Scalar, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_scalar(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Scalar, D::Error> {
        let raw = String::deserialize(d)?;
        parse_scalar(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Scalar {
        Scalar::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(&q(5, 1), 5), Valuation::Finite(1));
        assert_eq!(valuation(&Scalar::zero(), 5), Valuation::Infinity);
        // 120 = 2^3 * 3 * 5
        assert_eq!(valuation(&q(1, 120), 5), Valuation::Finite(-1));
        assert_eq!(valuation(&q(-50, 3), 5), Valuation::Finite(2));
    }

    #[test]
    fn legendre() {
        assert_eq!(factorial_valuation(5, 5), 1);
        assert_eq!(factorial_valuation(0, 5), 0);
        // direct summation: sum over i <= 30 of v_5(i)
        let direct: u64 = (1..=30u64)
            .map(|i| int_valuation(&BigInt::from(i), 5) as u64)
            .sum();
        assert_eq!(direct, 7);
        assert_eq!(factorial_valuation(30, 5), 7);
    }

    #[test]
    fn prime_validation() {
        assert!(Prime::new(5).is_ok());
        assert!(Prime::new(1).is_err());
        assert!(Prime::new(9).is_err());
        assert!(GlobalField::new(5, 0, 4, 2).is_err());
    }

    #[test]
    fn residues() {
        assert_eq!(residue(&q(7, 1), 5), Some(2));
        assert_eq!(residue(&q(1, 2), 5), Some(3));
        assert_eq!(residue(&q(1, 5), 5), None);
        assert_eq!(residue(&q(10, 3), 5), Some(0));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_scalar("-3/6").unwrap(), q(-1, 2));
        assert_eq!(format_scalar(&q(4, 2)), "2");
        assert_eq!(format_scalar(&q(-1, 5)), "-1/5");
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("x").is_err());
    }

    fn arb_scalar() -> impl Strategy<Value = Scalar> {
        (-2000i64..2000, 1i64..2000).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #[test]
        fn ultrametric(a in arb_scalar(), b in arb_scalar()) {
            let (na, nb) = (log_norm(&a, 5), log_norm(&b, 5));
            let ns = log_norm(&(&a + &b), 5);
            prop_assert!(ns <= na.max(nb));
            if na != nb {
                prop_assert_eq!(ns, na.max(nb));
            }
        }

        #[test]
        fn multiplicative(a in arb_scalar(), b in arb_scalar()) {
            prop_assert_eq!(valuation(&(&a * &b), 5), valuation(&a, 5) + valuation(&b, 5));
        }
    }
}
