//! Truncated Tate and Laurent series.
//!
//! A [`TateSeries`] is a finite sum `Σ a_α x^α` with `|α| ≤ D`; products drop every
//! term of total degree above the cap. The level-`n` norm weights `x^α` by `p^{n|α|}`
//! (the Gauss norm on the disk of radius `|π|^{-n}`); its family over `n` is the
//! Fréchet structure of `K{x}`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::padic::{format_scalar, is_negative, log_norm, LogNorm, Prime, Scalar};
use crate::text::{default_var_names, Algebra, Parser};

/// Exponent tuple, ordered graded-lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn zero(m: usize) -> Self {
        MultiIndex(vec![0; m])
    }

    pub fn unit(m: usize, i: usize) -> Self {
        let mut v = vec![0; m];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn from_slice(e: &[u32]) -> Self {
        MultiIndex(e.to_vec())
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other` when `other ≤ self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn with(&self, i: usize, e: u32) -> MultiIndex {
        let mut v = self.0.clone();
        v[i] = e;
        MultiIndex(v)
    }

    /// All `β ≤ self` componentwise.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![Vec::with_capacity(self.0.len())];
        for &e in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=e).map(move |k| {
                        let mut p = prefix.clone();
                        p.push(k);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(MultiIndex).collect()
    }

    /// Every multi-index in `m` variables of total degree `≤ cap`, in graded-lex order.
    pub fn all_up_to(m: usize, cap: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for d in 0..=cap {
            out.extend(Self::of_degree(m, d));
        }
        out.sort();
        out
    }

    pub fn of_degree(m: usize, d: usize) -> Vec<MultiIndex> {
        if m == 0 {
            return if d == 0 { vec![MultiIndex(vec![])] } else { vec![] };
        }
        let mut out = Vec::new();
        for first in 0..=d {
            for rest in Self::of_degree(m - 1, d - first) {
                let mut v = vec![first as u32];
                v.extend(rest.0);
                out.push(MultiIndex(v));
            }
        }
        out
    }

    /// `binom(α, β) = Π binom(α_i, β_i)`.
    pub fn binomial(&self, beta: &MultiIndex) -> Scalar {
        self.0
            .iter()
            .zip(&beta.0)
            .map(|(&a, &b)| crate::padic::binomial(a as u64, b as u64))
            .fold(Scalar::one(), |acc, c| acc * c)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Values of a family of norms indexed by level `n = 0..=n_max`, in `log_p` form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NormFamily(pub Vec<LogNorm>);

impl NormFamily {
    pub fn at(&self, n: usize) -> LogNorm {
        self.0[n]
    }

    pub fn is_monotone(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }

    /// Every level bounded, i.e. no `+∞` can occur; kept for symmetry with the
    /// sequence-space test, where boundedness is the membership criterion.
    pub fn is_bounded(&self) -> bool {
        true
    }
}

/// A truncated element of `K<x_1, …, x_m>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TateSeries {
    nvars: usize,
    deg_cap: usize,
    coeffs: BTreeMap<MultiIndex, Scalar>,
}

impl TateSeries {
    pub fn zero(nvars: usize, deg_cap: usize) -> Self {
        TateSeries {
            nvars,
            deg_cap,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, deg_cap: usize, c: Scalar) -> Self {
        Self::monomial(nvars, deg_cap, MultiIndex::zero(nvars), c)
    }

    pub fn one(nvars: usize, deg_cap: usize) -> Self {
        Self::constant(nvars, deg_cap, Scalar::one())
    }

    pub fn monomial(nvars: usize, deg_cap: usize, alpha: MultiIndex, c: Scalar) -> Self {
        assert_eq!(alpha.nvars(), nvars, "multi-index arity");
        let mut s = Self::zero(nvars, deg_cap);
        s.add_term(alpha, c);
        s
    }

    pub fn variable(nvars: usize, deg_cap: usize, i: usize) -> Self {
        Self::monomial(nvars, deg_cap, MultiIndex::unit(nvars, i), Scalar::one())
    }

    pub fn from_terms(
        nvars: usize,
        deg_cap: usize,
        terms: impl IntoIterator<Item = (MultiIndex, Scalar)>,
    ) -> Self {
        let mut s = Self::zero(nvars, deg_cap);
        for (a, c) in terms {
            s.add_term(a, c);
        }
        s
    }

    /// Univariate convenience: coefficients of `1, x, x^2, …`.
    pub fn from_coeffs(deg_cap: usize, coeffs: &[Scalar]) -> Self {
        Self::from_terms(
            1,
            deg_cap,
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| (MultiIndex(vec![j as u32]), c.clone())),
        )
    }

    /// Adds `c x^α`, dropping it when `|α|` exceeds the cap.
    pub fn add_term(&mut self, alpha: MultiIndex, c: Scalar) {
        if c.is_zero() || alpha.total() > self.deg_cap {
            return;
        }
        match self.coeffs.entry(alpha) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get_mut();
                *v += c;
                if v.is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn deg_cap(&self) -> usize {
        self.deg_cap
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Scalar {
        self.coeffs.get(alpha).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Scalar)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Largest total degree among stored terms.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.keys().map(|a| a.total()).max()
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(&MultiIndex::zero(self.nvars))
    }

    /// Same coefficients under a new cap (dropping terms above it).
    pub fn with_cap(&self, deg_cap: usize) -> Self {
        Self::from_terms(
            self.nvars,
            deg_cap,
            self.coeffs.iter().map(|(a, c)| (a.clone(), c.clone())),
        )
    }

    /// Keeps the terms of total degree `≤ i`.
    pub fn truncate(&self, i: usize) -> Self {
        TateSeries {
            nvars: self.nvars,
            deg_cap: self.deg_cap,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(a, _)| a.total() <= i)
                .map(|(a, c)| (a.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars, self.deg_cap);
        }
        TateSeries {
            nvars: self.nvars,
            deg_cap: self.deg_cap,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, v)| (a.clone(), v * c))
                .collect(),
        }
    }

    fn check_vars(&self, other: &TateSeries) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VariableMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &TateSeries) -> Result<TateSeries> {
        self.check_vars(other)?;
        let mut out = self.with_cap(self.deg_cap.min(other.deg_cap));
        for (a, c) in &other.coeffs {
            out.add_term(a.clone(), c.clone());
        }
        Ok(out)
    }

    /// Truncated product; the cap of the result is the smaller of the two caps.
    pub fn try_mul(&self, other: &TateSeries) -> Result<TateSeries> {
        self.check_vars(other)?;
        let cap = self.deg_cap.min(other.deg_cap);
        let mut out = Self::zero(self.nvars, cap);
        for (a, c) in &self.coeffs {
            if a.total() > cap {
                continue;
            }
            for (b, d) in &other.coeffs {
                if a.total() + b.total() <= cap {
                    out.add_term(a.add(b), c * d);
                }
            }
        }
        Ok(out)
    }

    /// Formal partial derivative `∂f/∂x_i`.
    pub fn derive(&self, i: usize) -> TateSeries {
        assert!(i < self.nvars, "variable index {i} out of range");
        let mut out = Self::zero(self.nvars, self.deg_cap);
        for (a, c) in &self.coeffs {
            let e = a.get(i);
            if e > 0 {
                out.add_term(a.with(i, e - 1), c * Scalar::from_integer(e.into()));
            }
        }
        out
    }

    /// `∂^α f`.
    pub fn derive_multi(&self, alpha: &MultiIndex) -> TateSeries {
        let mut f = self.clone();
        for (i, &e) in alpha.exps().iter().enumerate() {
            for _ in 0..e {
                if f.is_zero() {
                    return f;
                }
                f = f.derive(i);
            }
        }
        f
    }

    pub fn gauss_norm(&self, p: Prime) -> LogNorm {
        self.level_norm(p, 0)
    }

    /// `max_α (n|α| - v_p(a_α))`.
    pub fn level_norm(&self, p: Prime, n: u32) -> LogNorm {
        self.coeffs
            .iter()
            .map(|(a, c)| log_norm(c, p.get()).shift(n as i64 * a.total() as i64))
            .max()
            .unwrap_or(LogNorm::NegInf)
    }

    /// `n ↦ |f|_n` for `n = 0..=n_max`.
    pub fn kx_profile(&self, p: Prime, n_max: u32) -> NormFamily {
        NormFamily((0..=n_max).map(|n| self.level_norm(p, n)).collect())
    }

    /// Substitution `x_i ↦ p x_i`: restriction to the closed subdisk of radius `|p|`.
    pub fn restrict_subdisk(&self, p: Prime) -> TateSeries {
        TateSeries {
            nvars: self.nvars,
            deg_cap: self.deg_cap,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, c)| (a.clone(), c * p.pow(a.total() as i64)))
                .collect(),
        }
    }

    /// Reinterprets the series in `nvars` variables, sending variable `k` to `target[k]`.
    pub fn reread(&self, nvars: usize, target: &[usize]) -> TateSeries {
        assert_eq!(target.len(), self.nvars);
        Self::from_terms(
            nvars,
            self.deg_cap,
            self.coeffs.iter().map(|(a, c)| {
                let mut e = vec![0u32; nvars];
                for (k, &t) in target.iter().enumerate() {
                    e[t] += a.get(k);
                }
                (MultiIndex(e), c.clone())
            }),
        )
    }

    /// Exact value at a point (the series is a polynomial at truncation).
    pub fn evaluate(&self, point: &[Scalar]) -> Scalar {
        assert_eq!(point.len(), self.nvars);
        let mut acc = Scalar::zero();
        for (a, c) in &self.coeffs {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(a.exps()) {
                for _ in 0..e {
                    t *= x;
                }
            }
            acc += t;
        }
        acc
    }

    /// Parses a bare series body such as `3*x^2*y + 1/5*x`.
    pub fn parse_body(body: &str, vars: &[String], deg_cap: usize) -> Result<TateSeries> {
        let alg = SeriesAlgebra { vars, deg_cap };
        Parser::new(body).parse_all(&alg)
    }

    /// Parses the full text format `p=5; vars=x,y; deg<=32; 3*x^2*y + 1/5*x`.
    pub fn parse(text: &str) -> Result<ParsedSeries> {
        let mut p = None;
        let mut vars = None;
        let mut deg_cap = None;
        let mut body = None;
        for part in text.split(';') {
            let part = part.trim();
            if let Some(v) = part.strip_prefix("p=") {
                p = Some(
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Parse(format!("bad prime {v:?}")))?,
                );
            } else if let Some(v) = part.strip_prefix("vars=") {
                vars = Some(v.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>());
            } else if let Some(v) = part.strip_prefix("deg<=") {
                deg_cap = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad degree cap {v:?}")))?,
                );
            } else if body.is_none() {
                body = Some(part.to_string());
            } else {
                return Err(Error::Parse(format!("unexpected field {part:?}")));
            }
        }
        let vars = vars.unwrap_or_else(|| default_var_names(1));
        let deg_cap = deg_cap.unwrap_or(32);
        let body = body.ok_or_else(|| Error::Parse("missing series body".into()))?;
        let series = Self::parse_body(&body, &vars, deg_cap)?;
        Ok(ParsedSeries {
            p,
            vars,
            deg_cap,
            series,
        })
    }

    /// Renders with explicit variable names.
    pub fn display_with(&self, vars: &[String]) -> String {
        if self.coeffs.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (a, c)) in self.coeffs.iter().rev().enumerate() {
            let neg = is_negative(c);
            let mag = if neg { -c.clone() } else { c.clone() };
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = monomial_text(a, vars);
            if mono.is_empty() {
                out.push_str(&format_scalar(&mag));
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{}*{}", format_scalar(&mag), mono));
            }
        }
        out
    }
}

fn monomial_text(a: &MultiIndex, vars: &[String]) -> String {
    a.exps()
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| {
            if e == 1 {
                vars[i].clone()
            } else {
                format!("{}^{}", vars[i], e)
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

impl fmt::Display for TateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with(&default_var_names(self.nvars)))
    }
}

/// Result of parsing the full series text format.
#[derive(Clone, Debug)]
pub struct ParsedSeries {
    pub p: Option<u64>,
    pub vars: Vec<String>,
    pub deg_cap: usize,
    pub series: TateSeries,
}

struct SeriesAlgebra<'a> {
    vars: &'a [String],
    deg_cap: usize,
}

impl Algebra for SeriesAlgebra<'_> {
    type Value = TateSeries;

    fn scalar(&self, c: Scalar) -> Result<TateSeries> {
        Ok(TateSeries::constant(self.vars.len(), self.deg_cap, c))
    }

    fn ident(&self, name: &str) -> Result<TateSeries> {
        let i = self
            .vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::Parse(format!("unknown variable {name:?}")))?;
        Ok(TateSeries::variable(self.vars.len(), self.deg_cap, i))
    }

    fn add(&self, a: &TateSeries, b: &TateSeries) -> Result<TateSeries> {
        a.try_add(b)
    }

    fn neg(&self, a: &TateSeries) -> Result<TateSeries> {
        Ok(-a)
    }

    fn mul(&self, a: &TateSeries, b: &TateSeries) -> Result<TateSeries> {
        a.try_mul(b)
    }
}

impl Add for &TateSeries {
    type Output = TateSeries;
    fn add(self, rhs: &TateSeries) -> TateSeries {
        self.try_add(rhs).expect("series addition requires matching variable counts")
    }
}

impl Sub for &TateSeries {
    type Output = TateSeries;
    fn sub(self, rhs: &TateSeries) -> TateSeries {
        self + &(-rhs)
    }
}

impl Neg for &TateSeries {
    type Output = TateSeries;
    fn neg(self) -> TateSeries {
        TateSeries {
            nvars: self.nvars,
            deg_cap: self.deg_cap,
            coeffs: self.coeffs.iter().map(|(a, c)| (a.clone(), -c)).collect(),
        }
    }
}

impl Mul for &TateSeries {
    type Output = TateSeries;
    fn mul(self, rhs: &TateSeries) -> TateSeries {
        self.try_mul(rhs)
            .expect("series product requires matching variable counts")
    }
}

/// `f * g` truncated to the common cap.
pub fn series_mul(f: &TateSeries, g: &TateSeries) -> Result<TateSeries> {
    f.try_mul(g)
}

/// A Laurent polynomial `Σ_{-D ≤ j ≤ D} a_j x^j` viewed on the circle `|x| = |p|^s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentWindow {
    window: i64,
    radius_exp: i64,
    coeffs: BTreeMap<i64, Scalar>,
}

impl LaurentWindow {
    pub fn zero(window: i64, radius_exp: i64) -> Self {
        LaurentWindow {
            window,
            radius_exp,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        window: i64,
        radius_exp: i64,
        terms: impl IntoIterator<Item = (i64, Scalar)>,
    ) -> Result<Self> {
        let mut h = Self::zero(window, radius_exp);
        for (j, c) in terms {
            if j.abs() > window {
                return Err(Error::Invalid(format!(
                    "exponent {j} outside the window [-{window}, {window}]"
                )));
            }
            h.add_term(j, c);
        }
        Ok(h)
    }

    fn add_term(&mut self, j: i64, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(j).or_insert_with(Scalar::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(&j);
        }
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn radius_exp(&self) -> i64 {
        self.radius_exp
    }

    pub fn coeff(&self, j: i64) -> Scalar {
        self.coeffs.get(&j).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&i64, &Scalar)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `max_j |a_j| p^{-s j}` in `log_p` form.
    pub fn norm(&self, p: Prime) -> LogNorm {
        self.coeffs
            .iter()
            .map(|(&j, c)| log_norm(c, p.get()).shift(-self.radius_exp * j))
            .max()
            .unwrap_or(LogNorm::NegInf)
    }

    /// Restriction of a univariate series to the circle.
    pub fn from_series(f: &TateSeries, window: i64, radius_exp: i64) -> Result<Self> {
        if f.nvars() != 1 {
            return Err(Error::Unsupported(
                "Laurent windows are univariate".into(),
            ));
        }
        Self::from_terms(
            window,
            radius_exp,
            f.terms().map(|(a, c)| (a.get(0) as i64, c.clone())),
        )
    }

    pub fn sub(&self, other: &LaurentWindow) -> LaurentWindow {
        let mut out = self.clone();
        for (&j, c) in &other.coeffs {
            out.add_term(j, -c.clone());
        }
        out
    }
}

/// Splits `h` on the circle `|x| = |p|` as `h = f - g` with `f` holomorphic on the
/// inner disk `|x| ≤ |p|` and `g` holomorphic on the annulus `|p| ≤ |x| ≤ 1`.
///
/// `f` collects the non-negative powers and `g` the negated principal part.
pub fn laurent_split(h: &LaurentWindow) -> (TateSeries, LaurentWindow) {
    let cap = h.window.max(0) as usize;
    let f = TateSeries::from_terms(
        1,
        cap,
        h.coeffs
            .iter()
            .filter(|(&j, _)| j >= 0)
            .map(|(&j, c)| (MultiIndex(vec![j as u32]), c.clone())),
    );
    let mut g = LaurentWindow::zero(h.window, h.radius_exp);
    for (&j, c) in h.coeffs.iter().filter(|(&j, _)| j < 0) {
        g.add_term(j, -c.clone());
    }
    (f, g)
}

/// Truncated sequences `(v_i)` in a weighted carrier, the finite model of `S(V)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceSpace {
    /// log-norm weights of the carrier's basis vectors
    pub carrier_weights: Vec<i64>,
    pub entries: Vec<Vec<Scalar>>,
}

impl SequenceSpace {
    pub fn new(carrier_weights: Vec<i64>, entries: Vec<Vec<Scalar>>) -> Result<Self> {
        if entries.iter().any(|v| v.len() != carrier_weights.len()) {
            return Err(Error::Dimension(
                "sequence entry does not match the carrier dimension".into(),
            ));
        }
        Ok(SequenceSpace {
            carrier_weights,
            entries,
        })
    }

    fn entry_norm(&self, v: &[Scalar], p: Prime) -> LogNorm {
        v.iter()
            .zip(&self.carrier_weights)
            .map(|(c, &w)| log_norm(c, p.get()).shift(w))
            .max()
            .unwrap_or(LogNorm::NegInf)
    }

    /// `n ↦ sup_i |π^{-ni} v_i|`.
    pub fn profile(&self, p: Prime, n_max: u32) -> NormFamily {
        NormFamily(
            (0..=n_max)
                .map(|n| {
                    self.entries
                        .iter()
                        .enumerate()
                        .map(|(i, v)| self.entry_norm(v, p).shift(n as i64 * i as i64))
                        .max()
                        .unwrap_or(LogNorm::NegInf)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::scalar_from_i64;
    use proptest::prelude::*;

    fn p5() -> Prime {
        Prime::new(5).unwrap()
    }

    fn uni(cap: usize, c: &[i64]) -> TateSeries {
        TateSeries::from_coeffs(cap, &c.iter().map(|&v| scalar_from_i64(v)).collect::<Vec<_>>())
    }

    #[test]
    fn product_identity() {
        let a = uni(8, &[1, 1]);
        let b = uni(8, &[1, -1]);
        assert_eq!(&a * &b, uni(8, &[1, 0, -1]));
    }

    #[test]
    fn gauss_of_px_plus_x2() {
        assert_eq!(uni(8, &[0, 5, 1]).gauss_norm(p5()), LogNorm::Finite(0));
    }

    #[test]
    fn truncation_drops_high_terms() {
        let a = uni(3, &[0, 0, 1]);
        assert!((&a * &a).is_zero());
    }

    #[test]
    fn mismatched_vars_rejected() {
        let a = TateSeries::one(1, 4);
        let b = TateSeries::one(2, 4);
        assert!(matches!(
            series_mul(&a, &b),
            Err(Error::VariableMismatch { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(uni(8, &[0, 0, 0, 1]).derive(0), uni(8, &[0, 0, 3]));
        assert!(TateSeries::one(1, 8).derive(0).is_zero());
    }

    #[test]
    fn level_norm_examples() {
        let x2 = uni(8, &[0, 0, 1]);
        assert_eq!(x2.level_norm(p5(), 1), LogNorm::Finite(2));
        assert_eq!(x2.scale(&scalar_from_i64(125)).level_norm(p5(), 1), LogNorm::Finite(-1));
        assert_eq!(TateSeries::zero(1, 4).level_norm(p5(), 3), LogNorm::NegInf);
    }

    #[test]
    fn kx_profiles() {
        assert_eq!(
            TateSeries::one(1, 8).kx_profile(p5(), 4).0,
            vec![LogNorm::Finite(0); 5]
        );
        let x = TateSeries::variable(1, 8, 0);
        let prof = x.kx_profile(p5(), 4);
        assert_eq!(prof.0, (0..=4).map(LogNorm::Finite).collect::<Vec<_>>());
        // a_j = p^{j^2}: |f|_n = max_j (n j - j^2), attained near j = n/2
        let p = p5();
        let super_exp = TateSeries::from_coeffs(
            12,
            &(0..=12).map(|j| p.pow(j * j)).collect::<Vec<_>>(),
        );
        let prof = super_exp.kx_profile(p, 4);
        let oracle: Vec<LogNorm> = (0..=4i64)
            .map(|n| LogNorm::Finite((0..=12i64).map(|j| n * j - j * j).max().unwrap()))
            .collect();
        assert_eq!(prof.0, oracle);
        assert!(prof.is_monotone());
    }

    #[test]
    fn restriction_examples() {
        let p = p5();
        assert_eq!(uni(8, &[0, 0, 1]).restrict_subdisk(p), uni(8, &[0, 0, 25]));
        assert_eq!(uni(8, &[7]).restrict_subdisk(p), uni(8, &[7]));
    }

    #[test]
    fn scc_approximants() {
        // unit-ball element with all coefficients units
        let p = p5();
        let f = uni(16, &[1; 17]);
        for i in 0..16 {
            let diff = &f.restrict_subdisk(p) - &f.truncate(i).restrict_subdisk(p);
            assert!(diff.gauss_norm(p) <= LogNorm::Finite(-(i as i64 + 1)));
        }
    }

    #[test]
    fn laurent_split_examples() {
        let w = |t: &[(i64, i64)]| {
            LaurentWindow::from_terms(4, 1, t.iter().map(|&(j, c)| (j, scalar_from_i64(c))))
                .unwrap()
        };
        let (f, g) = laurent_split(&w(&[(-1, 1)]));
        assert!(f.is_zero());
        assert_eq!(g, w(&[(-1, -1)]));
        let (f, g) = laurent_split(&w(&[(1, 1)]));
        assert_eq!(f, TateSeries::variable(1, 4, 0));
        assert!(g.is_zero());
    }

    #[test]
    fn laurent_norm_on_circle() {
        let h = LaurentWindow::from_terms(4, 1, [(2, Scalar::one()), (-1, Scalar::one())])
            .unwrap();
        // |x^2| = p^{-2}, |x^{-1}| = p
        assert_eq!(h.norm(p5()), LogNorm::Finite(1));
    }

    #[test]
    fn parse_full_format() {
        let parsed = TateSeries::parse("p=5; vars=x,y; deg<=32; 3*x^2*y + 1/5*x").unwrap();
        assert_eq!(parsed.p, Some(5));
        assert_eq!(parsed.deg_cap, 32);
        let s = parsed.series;
        assert_eq!(s.coeff(&MultiIndex::from_slice(&[2, 1])), scalar_from_i64(3));
        assert_eq!(
            s.coeff(&MultiIndex::from_slice(&[1, 0])),
            Scalar::new(1.into(), 5.into())
        );
        assert_eq!(s.display_with(&parsed.vars), "3*x^2*y + 1/5*x");
        assert!(TateSeries::parse("vars=x; q*x").is_err());
    }

    #[test]
    fn sequence_profile() {
        let s = SequenceSpace::new(
            vec![0],
            vec![vec![Scalar::one()], vec![scalar_from_i64(25)], vec![scalar_from_i64(625)]],
        )
        .unwrap();
        // entries v_i = p^{2i}: sup_i (n i - 2 i)
        let prof = s.profile(p5(), 4);
        assert_eq!(
            prof.0,
            vec![0, 0, 0, 2, 4].into_iter().map(LogNorm::Finite).collect::<Vec<_>>()
        );
    }

    fn arb_series(m: usize, max_deg: usize, cap: usize) -> impl Strategy<Value = TateSeries> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0u32..=max_deg as u32, m),
                -30i64..30,
                1i64..30,
            ),
            0..8,
        )
        .prop_map(move |terms| {
            TateSeries::from_terms(
                m,
                cap,
                terms.into_iter().filter(|(e, _, _)| e.iter().sum::<u32>() as usize <= max_deg).map(
                    |(e, n, d)| (MultiIndex(e), Scalar::new(n.into(), d.into())),
                ),
            )
        })
    }

    /// Brute-force product by dense double loop, independent of `try_mul`.
    fn dense_product(f: &TateSeries, g: &TateSeries) -> BTreeMap<MultiIndex, Scalar> {
        let mut out = BTreeMap::new();
        for (a, c) in f.terms() {
            for (b, d) in g.terms() {
                let e = out.entry(a.add(b)).or_insert_with(Scalar::zero);
                *e += c * d;
            }
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    proptest! {
        #[test]
        fn gauss_multiplicative(f in arb_series(2, 8, 16), g in arb_series(2, 8, 16)) {
            let p = p5();
            let fg = &f * &g;
            prop_assert_eq!(&fg.coeffs, &dense_product(&f, &g));
            prop_assert_eq!(fg.gauss_norm(p), f.gauss_norm(p) + g.gauss_norm(p));
        }

        #[test]
        fn leibniz(f in arb_series(2, 6, 16), g in arb_series(2, 6, 16), i in 0usize..2) {
            let lhs = (&f * &g).derive(i);
            let rhs = &(&f.derive(i) * &g) + &(&f * &g.derive(i));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn level_norm_monotone(f in arb_series(2, 8, 16)) {
            prop_assert!(f.kx_profile(p5(), 4).is_monotone());
            prop_assert_eq!(f.level_norm(p5(), 0), f.gauss_norm(p5()));
        }

        #[test]
        fn restriction_contracts(f in arb_series(1, 10, 16)) {
            prop_assert!(f.restrict_subdisk(p5()).gauss_norm(p5()) <= f.gauss_norm(p5()));
        }

        #[test]
        fn split_recombines(terms in proptest::collection::vec((-6i64..=6, -20i64..20), 0..10)) {
            let h = LaurentWindow::from_terms(6, 1, terms.into_iter().map(|(j, c)| (j, scalar_from_i64(c)))).unwrap();
            let (f, g) = laurent_split(&h);
            let f_on_circle = LaurentWindow::from_series(&f, 6, 1).unwrap();
            prop_assert_eq!(f_on_circle.sub(&g), h);
        }
    }
}
