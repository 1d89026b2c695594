//! Differential operators in normal form `Σ f_α ∂^α` (functions on the left).
//!
//! Operators carry two caps: the order cap on `|α|` and the degree cap of the
//! coefficient series. Products drop every term exceeding either cap.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::homalg::{BoundedMap, Complex, TruncBanach};
use crate::linalg::SparseMatrix;
use crate::padic::{LogNorm, Prime, Scalar};
use crate::tate::{MultiIndex, TateSeries};
use crate::text::{default_var_names, Algebra, Parser};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOp {
    nvars: usize,
    deg_cap: usize,
    op_cap: usize,
    terms: BTreeMap<MultiIndex, TateSeries>,
}

/// A level together with the `log_p` value of an operator norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OpLevelNorm {
    pub level: u32,
    pub value: LogNorm,
}

impl DiffOp {
    pub fn zero(nvars: usize, deg_cap: usize, op_cap: usize) -> Self {
        DiffOp {
            nvars,
            deg_cap,
            op_cap,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize, deg_cap: usize, op_cap: usize) -> Self {
        Self::from_series(&TateSeries::one(nvars, deg_cap), op_cap)
    }

    /// Multiplication by a function.
    pub fn from_series(f: &TateSeries, op_cap: usize) -> Self {
        let mut op = Self::zero(f.nvars(), f.deg_cap(), op_cap);
        op.add_term(MultiIndex::zero(f.nvars()), f.clone());
        op
    }

    /// The coordinate derivation `∂_i`.
    pub fn derivation(nvars: usize, i: usize, deg_cap: usize, op_cap: usize) -> Self {
        Self::monomial(
            MultiIndex::unit(nvars, i),
            TateSeries::one(nvars, deg_cap),
            op_cap,
        )
    }

    pub fn monomial(alpha: MultiIndex, f: TateSeries, op_cap: usize) -> Self {
        let mut op = Self::zero(f.nvars(), f.deg_cap(), op_cap);
        op.add_term(alpha, f);
        op
    }

    /// Adds `f ∂^α`; terms above the order cap are dropped.
    pub fn add_term(&mut self, alpha: MultiIndex, f: TateSeries) {
        if alpha.total() > self.op_cap || f.is_zero() {
            return;
        }
        let f = if f.deg_cap() == self.deg_cap {
            f
        } else {
            f.with_cap(self.deg_cap)
        };
        match self.terms.remove(&alpha) {
            Some(g) => {
                let s = &g + &f;
                if !s.is_zero() {
                    self.terms.insert(alpha, s);
                }
            }
            None => {
                if !f.is_zero() {
                    self.terms.insert(alpha, f);
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

    pub fn op_cap(&self) -> usize {
        self.op_cap
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &TateSeries)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> TateSeries {
        self.terms
            .get(alpha)
            .cloned()
            .unwrap_or_else(|| TateSeries::zero(self.nvars, self.deg_cap))
    }

    /// Highest `|α|` with nonzero coefficient.
    pub fn order(&self) -> Option<usize> {
        self.terms.keys().map(MultiIndex::total).max()
    }

    pub fn with_caps(&self, deg_cap: usize, op_cap: usize) -> Self {
        let mut out = Self::zero(self.nvars, deg_cap, op_cap);
        for (a, f) in &self.terms {
            out.add_term(a.clone(), f.with_cap(deg_cap));
        }
        out
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        let mut out = Self::zero(self.nvars, self.deg_cap, self.op_cap);
        for (a, f) in &self.terms {
            out.add_term(a.clone(), f.scale(c));
        }
        out
    }

    /// Left multiplication by a function: `g · P`.
    pub fn mul_series_left(&self, g: &TateSeries) -> Self {
        let mut out = Self::zero(self.nvars, self.deg_cap.min(g.deg_cap()), self.op_cap);
        for (a, f) in &self.terms {
            out.add_term(a.clone(), g * f);
        }
        out
    }

    fn check(&self, other: &DiffOp) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VariableMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &DiffOp) -> Result<DiffOp> {
        self.check(other)?;
        let mut out = self.with_caps(
            self.deg_cap.min(other.deg_cap),
            self.op_cap.min(other.op_cap),
        );
        for (a, f) in &other.terms {
            out.add_term(a.clone(), f.clone());
        }
        Ok(out)
    }

    /// Normal form of the composite `P ∘ Q`, using
    /// `∂^α g = Σ_{β≤α} binom(α,β) ∂^β(g) ∂^{α-β}`.
    pub fn op_mul(&self, other: &DiffOp) -> Result<DiffOp> {
        self.check(other)?;
        let deg_cap = self.deg_cap.min(other.deg_cap);
        let op_cap = self.op_cap.min(other.op_cap);
        let mut out = Self::zero(self.nvars, deg_cap, op_cap);
        for (alpha, f) in &self.terms {
            for beta in alpha.below() {
                let rest = alpha.checked_sub(&beta).expect("beta below alpha");
                let c = alpha.binomial(&beta);
                for (gamma, g) in &other.terms {
                    let order = rest.total() + gamma.total();
                    if order > op_cap {
                        continue;
                    }
                    let dg = g.derive_multi(&beta);
                    if dg.is_zero() {
                        continue;
                    }
                    out.add_term(rest.add(gamma), (f * &dg).scale(&c));
                }
            }
        }
        Ok(out)
    }

    /// `P(f) = Σ f_α ∂^α(f)`.
    pub fn op_apply(&self, f: &TateSeries) -> Result<TateSeries> {
        if f.nvars() != self.nvars {
            return Err(Error::VariableMismatch {
                left: self.nvars,
                right: f.nvars(),
            });
        }
        let mut acc = TateSeries::zero(self.nvars, self.deg_cap.min(f.deg_cap()));
        for (alpha, c) in &self.terms {
            acc = &acc + &(c * &f.derive_multi(alpha));
        }
        Ok(acc)
    }

    /// `max_α (log|f_α| + n|α|)`.
    pub fn op_level_norm(&self, p: Prime, n: u32) -> LogNorm {
        self.terms
            .iter()
            .map(|(a, f)| f.gauss_norm(p).shift(n as i64 * a.total() as i64))
            .max()
            .unwrap_or(LogNorm::NegInf)
    }

    pub fn level_norm(&self, p: Prime, n: u32) -> OpLevelNorm {
        OpLevelNorm {
            level: n,
            value: self.op_level_norm(p, n),
        }
    }

    /// Rewrites the operator as `Σ ∂^α g_α` (functions on the right), via
    /// `f ∂^α = Σ_{β≤α} (-1)^{|β|} binom(α,β) ∂^{α-β} ∂^β(f)`.
    pub fn anti_normal_form(&self) -> BTreeMap<MultiIndex, TateSeries> {
        let mut out: BTreeMap<MultiIndex, TateSeries> = BTreeMap::new();
        for (alpha, f) in &self.terms {
            for beta in alpha.below() {
                let rest = alpha.checked_sub(&beta).expect("beta below alpha");
                let mut c = alpha.binomial(&beta);
                if beta.total() % 2 == 1 {
                    c = -c;
                }
                let g = f.derive_multi(&beta).scale(&c);
                if g.is_zero() {
                    continue;
                }
                let e = out
                    .entry(rest)
                    .or_insert_with(|| TateSeries::zero(self.nvars, self.deg_cap));
                *e = &*e + &g;
            }
        }
        out.retain(|_, g| !g.is_zero());
        out
    }

    /// Splits `P = Σ_j P_j ∂_k^j` with every `P_j` free of `∂_k`.
    pub fn decompose_in(&self, k: usize) -> BTreeMap<u32, DiffOp> {
        let mut out: BTreeMap<u32, DiffOp> = BTreeMap::new();
        for (alpha, f) in &self.terms {
            let j = alpha.get(k);
            out.entry(j)
                .or_insert_with(|| Self::zero(self.nvars, self.deg_cap, self.op_cap))
                .add_term(alpha.with(k, 0), f.clone());
        }
        out
    }

    /// Parses the operator text format `(3*x^2)*d1^2*d2 + (1/5)*d1`.
    pub fn parse(text: &str, vars: &[String], deg_cap: usize, op_cap: usize) -> Result<DiffOp> {
        let alg = OpAlgebra {
            vars,
            deg_cap,
            op_cap,
        };
        Parser::new(text).parse_all(&alg)
    }

    pub fn display_with(&self, vars: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .rev()
            .map(|(alpha, f)| {
                let mut s = format!("({})", f.display_with(vars));
                for (i, &e) in alpha.exps().iter().enumerate() {
                    match e {
                        0 => {}
                        1 => s.push_str(&format!("*d{}", i + 1)),
                        _ => s.push_str(&format!("*d{}^{}", i + 1, e)),
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_with(&default_var_names(self.nvars)))
    }
}

impl Add for &DiffOp {
    type Output = DiffOp;
    fn add(self, rhs: &DiffOp) -> DiffOp {
        self.try_add(rhs).expect("operator sum requires matching variable counts")
    }
}

impl Neg for &DiffOp {
    type Output = DiffOp;
    fn neg(self) -> DiffOp {
        self.scale(&-Scalar::one())
    }
}

impl Sub for &DiffOp {
    type Output = DiffOp;
    fn sub(self, rhs: &DiffOp) -> DiffOp {
        self + &(-rhs)
    }
}

/// Free-standing form of [`DiffOp::op_mul`].
pub fn op_mul(p: &DiffOp, q: &DiffOp) -> Result<DiffOp> {
    p.op_mul(q)
}

pub fn op_apply(p: &DiffOp, f: &TateSeries) -> Result<TateSeries> {
    p.op_apply(f)
}

pub fn op_level_norm(p: &DiffOp, prime: Prime, n: u32) -> LogNorm {
    p.op_level_norm(prime, n)
}

struct OpAlgebra<'a> {
    vars: &'a [String],
    deg_cap: usize,
    op_cap: usize,
}

impl Algebra for OpAlgebra<'_> {
    type Value = DiffOp;

    fn scalar(&self, c: Scalar) -> Result<DiffOp> {
        Ok(DiffOp::from_series(
            &TateSeries::constant(self.vars.len(), self.deg_cap, c),
            self.op_cap,
        ))
    }

    fn ident(&self, name: &str) -> Result<DiffOp> {
        let m = self.vars.len();
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Ok(DiffOp::from_series(
                &TateSeries::variable(m, self.deg_cap, i),
                self.op_cap,
            ));
        }
        let index = if name == "d" && m == 1 {
            Some(1)
        } else {
            name.strip_prefix('d').and_then(|s| s.parse::<usize>().ok())
        };
        match index {
            Some(i) if (1..=m).contains(&i) => {
                Ok(DiffOp::derivation(m, i - 1, self.deg_cap, self.op_cap))
            }
            _ => Err(Error::Parse(format!("unknown symbol {name:?}"))),
        }
    }

    fn add(&self, a: &DiffOp, b: &DiffOp) -> Result<DiffOp> {
        a.try_add(b)
    }

    fn neg(&self, a: &DiffOp) -> Result<DiffOp> {
        Ok(-a)
    }

    fn mul(&self, a: &DiffOp, b: &DiffOp) -> Result<DiffOp> {
        a.op_mul(b)
    }
}

/// Output of [`commutator_preimage`]: `C` with `C·y - y·C = P` and its norm bound.
#[derive(Clone, Debug)]
pub struct DivisionWitness {
    pub preimage: DiffOp,
    /// `|C|_{n-1}`
    pub dropped_norm: LogNorm,
    /// `|P|_n + (n - 1)`
    pub bound: LogNorm,
}

impl DivisionWitness {
    pub fn certified(&self) -> bool {
        self.dropped_norm <= self.bound
    }
}

/// Solves `P = C·y_k - y_k·C` with `C = Σ_j P_j ∂_k^{j+1}/(j+1)`, where
/// `P = Σ_j P_j ∂_k^j` and the `P_j` are free of `∂_k`.
///
/// `C` lives one order higher than `P`, so its order cap is `P.op_cap() + 1`.
pub fn commutator_preimage(p_op: &DiffOp, k: usize, n: u32, prime: Prime) -> Result<DivisionWitness> {
    if n == 0 {
        return Err(Error::LevelTooLow(n));
    }
    if k >= p_op.nvars() {
        return Err(Error::Invalid(format!(
            "coordinate index {k} out of range for {} variables",
            p_op.nvars()
        )));
    }
    let m = p_op.nvars();
    let op_cap = p_op.op_cap() + 1;
    let mut c = DiffOp::zero(m, p_op.deg_cap(), op_cap);
    for (j, part) in p_op.decompose_in(k) {
        let lift = MultiIndex::unit(m, k);
        let inv = Scalar::new(1.into(), (j as i64 + 1).into());
        for (alpha, f) in part.terms() {
            let mut a = alpha.clone();
            for _ in 0..=j {
                a = a.add(&lift);
            }
            c.add_term(a, f.scale(&inv));
        }
    }
    let dropped_norm = c.op_level_norm(prime, n - 1);
    let bound = p_op.op_level_norm(prime, n).shift(n as i64 - 1);
    Ok(DivisionWitness {
        preimage: c,
        dropped_norm,
        bound,
    })
}

/// `C·y_k - y_k·C` computed by [`DiffOp::op_mul`].
pub fn commutator_with_coordinate(c: &DiffOp, k: usize) -> Result<DiffOp> {
    let y = DiffOp::from_series(
        &TateSeries::variable(c.nvars(), c.deg_cap(), k),
        c.op_cap(),
    );
    Ok(&c.op_mul(&y)? - &y.op_mul(c)?)
}

/// Basis element `x^γ ∂^β ⊗ ∂_J` of the truncated Spencer complex.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct SpencerCell {
    gamma: MultiIndex,
    beta: MultiIndex,
    wedge: Vec<usize>,
}

pub(crate) fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Structure constants of the frame `∂_1, …, ∂_m`: `[∂_i, ∂_j] = Σ c_k ∂_k`.
fn coordinate_bracket(_i: usize, _j: usize) -> Vec<(usize, Scalar)> {
    Vec::new()
}

/// Inserts `∂_k` in front of the sorted wedge `rest`; returns the sign of the sort
/// and the sorted wedge, or `None` when `k` already occurs.
pub(crate) fn wedge_insert(k: usize, rest: &[usize]) -> Option<(i64, Vec<usize>)> {
    if rest.contains(&k) {
        return None;
    }
    let pos = rest.iter().filter(|&&r| r < k).count();
    let mut w = rest.to_vec();
    w.insert(pos, k);
    Some((if pos % 2 == 0 { 1 } else { -1 }, w))
}

fn cell_label(c: &SpencerCell, vars: &[String]) -> String {
    let mut parts = Vec::new();
    if !c.gamma.is_zero() {
        parts.push(
            TateSeries::monomial(c.gamma.nvars(), usize::MAX, c.gamma.clone(), Scalar::one())
                .display_with(vars),
        );
    }
    for (i, &e) in c.beta.exps().iter().enumerate() {
        match e {
            0 => {}
            1 => parts.push(format!("d{}", i + 1)),
            _ => parts.push(format!("d{}^{}", i + 1, e)),
        }
    }
    let mut s = if parts.is_empty() { "1".to_string() } else { parts.join("*") };
    if !c.wedge.is_empty() {
        let w: Vec<String> = c.wedge.iter().map(|i| format!("d{}", i + 1)).collect();
        s.push_str(&format!("(x){}", w.join("^")));
    }
    s
}

/// The truncated Spencer complex `D_n ⊗ ∧^m T → … → D_n ⊗ T → D_n → O`.
///
/// Basis elements are `x^γ ∂^β ⊗ ∂_J` with `|γ| ≤ deg_cap` and
/// `|β| + |J| ≤ op_cap`; the differential preserves `|β| + |J|`, so the truncation
/// is a subcomplex. `D_n ⊗ ∧^k T` sits in degree `-k` and `O` in degree 1.
/// Level-`n` weights are `n(|β| + |J|)`.
pub fn spencer_complex(
    m: usize,
    n: u32,
    deg_cap: usize,
    op_cap: usize,
    prime: Prime,
) -> Result<Complex> {
    if m == 0 || m > 3 {
        return Err(Error::Unsupported(format!(
            "Spencer complexes are built for 1 to 3 variables, got {m}"
        )));
    }
    let vars = default_var_names(m);
    let gammas = MultiIndex::all_up_to(m, deg_cap);
    let mut cells: Vec<Vec<SpencerCell>> = Vec::new();
    for k in (0..=m).rev() {
        let mut layer = Vec::new();
        if k <= op_cap {
            for wedge in subsets(m, k) {
                for beta in MultiIndex::all_up_to(m, op_cap - k) {
                    for gamma in &gammas {
                        layer.push(SpencerCell {
                            gamma: gamma.clone(),
                            beta: beta.clone(),
                            wedge: wedge.clone(),
                        });
                    }
                }
            }
        }
        layer.sort();
        cells.push(layer);
    }
    let index: Vec<BTreeMap<&SpencerCell, usize>> = cells
        .iter()
        .map(|layer| layer.iter().enumerate().map(|(i, c)| (c, i)).collect())
        .collect();
    let mut spaces: Vec<TruncBanach> = cells
        .iter()
        .map(|layer| {
            TruncBanach::new(
                prime,
                layer.iter().map(|c| cell_label(c, &vars)).collect(),
                layer
                    .iter()
                    .map(|c| n as i64 * (c.beta.total() + c.wedge.len()) as i64)
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    let gamma_index: BTreeMap<&MultiIndex, usize> =
        gammas.iter().enumerate().map(|(i, g)| (g, i)).collect();
    spaces.push(TruncBanach::new(
        prime,
        gammas
            .iter()
            .map(|g| {
                TateSeries::monomial(m, usize::MAX, g.clone(), Scalar::one()).display_with(&vars)
            })
            .collect(),
        vec![0; gammas.len()],
    )?);

    let mut maps = Vec::new();
    for (layer_idx, layer) in cells.iter().enumerate() {
        let k = m - layer_idx;
        let src = &spaces[layer_idx];
        let tgt = &spaces[layer_idx + 1];
        let mut mat = SparseMatrix::zeros(tgt.dim(), src.dim());
        for (col, cell) in layer.iter().enumerate() {
            if k == 0 {
                if cell.beta.is_zero() {
                    mat.add_entry(gamma_index[&cell.gamma], col, Scalar::one());
                }
                continue;
            }
            let next = &index[layer_idx + 1];
            for t in 0..k {
                let sign = if t % 2 == 0 { 1 } else { -1 };
                let j = cell.wedge[t];
                let mut rest = cell.wedge.clone();
                rest.remove(t);
                let target = SpencerCell {
                    gamma: cell.gamma.clone(),
                    beta: cell.beta.add(&MultiIndex::unit(m, j)),
                    wedge: rest,
                };
                if let Some(&row) = next.get(&target) {
                    mat.add_entry(row, col, Scalar::from_integer(sign.into()));
                }
            }
            for s in 0..k {
                for t in (s + 1)..k {
                    let sign: i64 = if (s + t) % 2 == 0 { 1 } else { -1 };
                    let rest: Vec<usize> = cell
                        .wedge
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != s && i != t)
                        .map(|(_, &w)| w)
                        .collect();
                    for (l, c) in coordinate_bracket(cell.wedge[s], cell.wedge[t]) {
                        if let Some((sg, wedge)) = wedge_insert(l, &rest) {
                            let target = SpencerCell {
                                gamma: cell.gamma.clone(),
                                beta: cell.beta.clone(),
                                wedge,
                            };
                            if let Some(&row) = next.get(&target) {
                                mat.add_entry(row, col, c.clone() * Scalar::from_integer((sign * sg).into()));
                            }
                        }
                    }
                }
            }
        }
        maps.push(BoundedMap::new(src.clone(), tgt.clone(), mat)?);
    }
    Complex::new(-(m as i64), spaces, maps)
}

/// Rank bookkeeping for exactness: `dim C^j = rank d^j + rank d^{j-1}` at every spot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExactnessCount {
    pub degree: i64,
    pub dim: usize,
    pub rank_out: usize,
    pub rank_in: usize,
}

impl ExactnessCount {
    pub fn exact(&self) -> bool {
        self.dim == self.rank_out + self.rank_in
    }
}

pub fn exactness_counts(c: &Complex) -> Vec<ExactnessCount> {
    let ranks: Vec<usize> = c.maps().iter().map(|f| f.matrix().rank()).collect();
    (0..c.len())
        .map(|k| ExactnessCount {
            degree: c.lowest() + k as i64,
            dim: c.space(k).dim(),
            rank_out: ranks.get(k).copied().unwrap_or(0),
            rank_in: if k == 0 { 0 } else { ranks[k - 1] },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::scalar_from_i64;
    use proptest::prelude::*;

    fn p5() -> Prime {
        Prime::new(5).unwrap()
    }

    fn op(s: &str) -> DiffOp {
        DiffOp::parse(s, &default_var_names(1), 16, 8).unwrap()
    }

    fn op2(s: &str) -> DiffOp {
        DiffOp::parse(s, &default_var_names(2), 12, 6).unwrap()
    }

    #[test]
    fn weyl_relations() {
        assert_eq!(op("d*x"), op("x*d + 1"));
        assert_eq!(op("d^2*x"), op("x*d^2 + 2*d"));
        assert_eq!(op("(x*d)*(x*d)"), op("x^2*d^2 + x*d"));
        assert_eq!(op2("d1*d2"), op2("d2*d1"));
        assert_eq!(op2("d1*y"), op2("y*d1"));
    }

    #[test]
    fn leibniz_oracle_for_second_derivative() {
        // ∂^2 x^3 = x^3 ∂^2 + 6x^2 ∂ + 6x, expanded by hand from (fg)'' = f''g + 2f'g' + fg''
        assert_eq!(op("d^2*x^3"), op("x^3*d^2 + 6*x^2*d + 6*x"));
    }

    #[test]
    fn apply_examples() {
        let x3 = TateSeries::parse_body("x^3", &default_var_names(1), 16).unwrap();
        assert_eq!(op("x*d").op_apply(&x3).unwrap(), x3.scale(&scalar_from_i64(3)));
        let one = TateSeries::one(1, 16);
        let p = op("(2+x)*d^2 + 7*x + 3");
        assert_eq!(p.op_apply(&one).unwrap(), p.coeff(&MultiIndex::zero(1)));
    }

    #[test]
    fn level_norm_examples() {
        for n in 0..4 {
            assert_eq!(op("d").op_level_norm(p5(), n), LogNorm::Finite(n as i64));
        }
        assert_eq!(op("5*d^2").op_level_norm(p5(), 1), LogNorm::Finite(1));
        assert_eq!(DiffOp::zero(1, 4, 4).op_level_norm(p5(), 2), LogNorm::NegInf);
    }

    #[test]
    fn text_roundtrip() {
        let vars = default_var_names(2);
        let p = DiffOp::parse("(3*x^2)*d1^2*d2 + (1/5)*d1", &vars, 8, 4).unwrap();
        assert_eq!(p.display_with(&vars), "(3*x^2)*d1^2*d2 + (1/5)*d1");
        assert_eq!(DiffOp::parse(&p.display_with(&vars), &vars, 8, 4).unwrap(), p);
        assert!(DiffOp::parse("d3", &vars, 8, 4).is_err());
    }

    #[test]
    fn anti_normal_form_examples() {
        // x∂ = ∂x - 1
        let a = op("x*d").anti_normal_form();
        assert_eq!(a[&MultiIndex::from_slice(&[1])], TateSeries::variable(1, 16, 0));
        assert_eq!(a[&MultiIndex::from_slice(&[0])], TateSeries::constant(1, 16, scalar_from_i64(-1)));
    }

    #[test]
    fn division_examples() {
        let w = commutator_preimage(&op("1"), 0, 1, p5()).unwrap();
        assert_eq!(w.preimage, op("d").with_caps(16, 9));
        assert_eq!(commutator_with_coordinate(&w.preimage, 0).unwrap().with_caps(16, 8), op("1"));
        let w = commutator_preimage(&op("d"), 0, 1, p5()).unwrap();
        assert_eq!(w.preimage, op("1/2*d^2").with_caps(16, 9));
        assert!(matches!(
            commutator_preimage(&op("d"), 0, 0, p5()),
            Err(Error::LevelTooLow(0))
        ));
    }

    #[test]
    fn spencer_one_variable() {
        let c = spencer_complex(1, 1, 4, 3, p5()).unwrap();
        assert!(c.composition_is_zero());
        assert!(exactness_counts(&c).iter().all(ExactnessCount::exact));
        // D ⊗ T → D sends x ⊗ ∂ to x∂
        let d = c.map(0);
        let src = c.space(0).position("x(x)d1").unwrap();
        let tgt = c.space(1).position("x*d1").unwrap();
        assert_eq!(d.matrix().get(tgt, src), Scalar::one());
    }

    #[test]
    fn spencer_two_variable_signs() {
        let c = spencer_complex(2, 1, 2, 3, p5()).unwrap();
        assert!(c.composition_is_zero());
        let src = c.space(0).position("1(x)d1^d2").unwrap();
        let d = c.map(0);
        let col = d.matrix().column(src);
        let s1 = c.space(1).position("d1(x)d2").unwrap();
        let s2 = c.space(1).position("d2(x)d1").unwrap();
        assert_eq!(col.get(&s1), Some(&Scalar::one()));
        assert_eq!(col.get(&s2), Some(&scalar_from_i64(-1)));
        assert_eq!(col.len(), 2);
        assert!(exactness_counts(&c).iter().all(ExactnessCount::exact));
    }

    #[test]
    fn spencer_rejects_large_m() {
        assert!(spencer_complex(4, 1, 2, 2, p5()).is_err());
    }

    fn arb_op(m: usize) -> impl Strategy<Value = DiffOp> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0u32..3, m),
                proptest::collection::vec(0u32..3, m),
                -9i64..9,
            ),
            0..5,
        )
        .prop_map(move |terms| {
            let mut p = DiffOp::zero(m, 24, 12);
            for (a, g, c) in terms {
                p.add_term(
                    MultiIndex::from_slice(&a),
                    TateSeries::monomial(m, 24, MultiIndex::from_slice(&g), scalar_from_i64(c)),
                );
            }
            p
        })
    }

    fn arb_series(m: usize) -> impl Strategy<Value = TateSeries> {
        proptest::collection::vec((proptest::collection::vec(0u32..4, m), -9i64..9), 0..6).prop_map(
            move |t| {
                TateSeries::from_terms(
                    m,
                    24,
                    t.into_iter()
                        .map(|(e, c)| (MultiIndex::from_slice(&e), scalar_from_i64(c))),
                )
            },
        )
    }

    proptest! {
        #[test]
        fn apply_is_a_module_action(p in arb_op(2), q in arb_op(2), f in arb_series(2)) {
            let lhs = p.op_mul(&q).unwrap().op_apply(&f).unwrap();
            let rhs = p.op_apply(&q.op_apply(&f).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn associative(p in arb_op(2), q in arb_op(2), r in arb_op(2)) {
            let lhs = p.op_mul(&q).unwrap().op_mul(&r).unwrap();
            let rhs = p.op_mul(&q.op_mul(&r).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn submultiplicative(p in arb_op(2), q in arb_op(2), n in 0u32..4) {
            let pq = p.op_mul(&q).unwrap();
            prop_assert!(pq.op_level_norm(p5(), n) <= p.op_level_norm(p5(), n) + q.op_level_norm(p5(), n));
            prop_assert!(p.op_level_norm(p5(), n) <= p.op_level_norm(p5(), n + 1));
        }

        #[test]
        fn anti_normal_form_recombines(p in arb_op(2)) {
            let mut back = DiffOp::zero(2, 24, 12);
            for (alpha, g) in p.anti_normal_form() {
                let d = DiffOp::monomial(alpha, TateSeries::one(2, 24), 12);
                back = &back + &d.op_mul(&DiffOp::from_series(&g, 12)).unwrap();
            }
            prop_assert_eq!(back, p);
        }

        #[test]
        fn division_reconstructs(p in arb_op(2), k in 0usize..2) {
            let w = commutator_preimage(&p, k, 2, p5()).unwrap();
            let back = commutator_with_coordinate(&w.preimage, k).unwrap();
            prop_assert_eq!(back.with_caps(p.deg_cap(), p.op_cap()), p);
            prop_assert!(w.certified());
        }
    }
}
