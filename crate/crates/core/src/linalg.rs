//! Sparse exact linear algebra over `Q`.
//!
//! [`Echelon`] is a row-reduction with pivots at the smallest surviving index and
//! optional tracking of the column combinations, used for ranks, kernels and
//! particular solutions. [`OrthoBasis`] builds a `p`-adically orthogonal basis of
//! a subspace of a weighted space; reducing a vector against it yields the
//! quotient norm exactly.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::padic::{log_norm, LogNorm, Prime, Scalar};

pub type SparseVec = BTreeMap<usize, Scalar>;

/// `v += c * w`, dropping cancelled entries.
pub fn axpy(v: &mut SparseVec, c: &Scalar, w: &SparseVec) {
    if c.is_zero() {
        return;
    }
    for (&i, x) in w {
        let e = v.entry(i).or_insert_with(Scalar::zero);
        *e += c * x;
        if e.is_zero() {
            v.remove(&i);
        }
    }
}

pub fn scale_vec(v: &mut SparseVec, c: &Scalar) {
    for x in v.values_mut() {
        *x *= c;
    }
}

pub fn to_dense(v: &SparseVec, n: usize) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); n];
    for (&i, x) in v {
        out[i] = x.clone();
    }
    out
}

pub fn from_dense(v: &[Scalar]) -> SparseVec {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(i, x)| (i, x.clone()))
        .collect()
}

/// Weighted norm `max_i (log|c_i| + w_i)`.
pub fn weighted_norm(v: &SparseVec, weights: &[i64], p: Prime) -> LogNorm {
    v.iter()
        .map(|(&i, c)| log_norm(c, p.get()).shift(weights[i]))
        .max()
        .unwrap_or(LogNorm::NegInf)
}

/// Column-major sparse matrix: column `j` is the image of the `j`-th basis vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    nrows: usize,
    cols: Vec<SparseVec>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            cols: vec![SparseVec::new(); ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.add_entry(i, i, Scalar::one());
        }
        m
    }

    pub fn from_columns(nrows: usize, cols: Vec<SparseVec>) -> Self {
        assert!(cols.iter().all(|c| c.keys().all(|&i| i < nrows)));
        SparseMatrix { nrows, cols }
    }

    /// Builds from dense rows.
    pub fn from_rows(rows: &[Vec<Scalar>], ncols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols);
            for (j, x) in r.iter().enumerate() {
                m.add_entry(i, j, x.clone());
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn add_entry(&mut self, i: usize, j: usize, c: Scalar) {
        assert!(i < self.nrows, "row {i} out of range");
        if c.is_zero() {
            return;
        }
        let col = &mut self.cols[j];
        let e = col.entry(i).or_insert_with(Scalar::zero);
        *e += c;
        if e.is_zero() {
            col.remove(&i);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Scalar {
        self.cols[j].get(&i).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn column(&self, j: usize) -> &SparseVec {
        &self.cols[j]
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(BTreeMap::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(BTreeMap::is_empty)
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (&j, c) in v {
            axpy(&mut out, c, &self.cols[j]);
        }
        out
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols(), other.nrows, "composition shape");
        SparseMatrix {
            nrows: self.nrows,
            cols: other.cols.iter().map(|c| self.apply(c)).collect(),
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Self::zeros(self.ncols(), self.nrows);
        for (j, col) in self.cols.iter().enumerate() {
            for (&i, c) in col {
                t.cols[i].insert(j, c.clone());
            }
        }
        t
    }

    /// Connected components of the bipartite row/column incidence graph, as lists
    /// of column indices. Columns that are zero form singleton components.
    pub fn column_components(&self) -> Vec<Vec<usize>> {
        let n = self.ncols();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut row_owner: Vec<Option<usize>> = vec![None; self.nrows];
        for (j, col) in self.cols.iter().enumerate() {
            for &i in col.keys() {
                match row_owner[i] {
                    None => row_owner[i] = Some(j),
                    Some(k) => {
                        let (a, b) = (find(&mut parent, j), find(&mut parent, k));
                        if a != b {
                            parent[a] = b;
                        }
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for j in 0..n {
            let r = find(&mut parent, j);
            groups.entry(r).or_default().push(j);
        }
        groups.into_values().collect()
    }

    /// Rank, computed one connected component at a time.
    pub fn rank(&self) -> usize {
        self.column_components()
            .into_iter()
            .map(|comp| {
                let mut e = Echelon::new(false);
                comp.iter()
                    .filter(|&&j| e.insert(self.cols[j].clone(), j).is_none())
                    .count()
            })
            .sum()
    }

    /// A basis of the kernel.
    pub fn kernel(&self) -> Vec<SparseVec> {
        let mut out = Vec::new();
        for comp in self.column_components() {
            let mut e = Echelon::new(true);
            for &j in &comp {
                if let Some(k) = e.insert(self.cols[j].clone(), j) {
                    out.push(k);
                }
            }
        }
        out
    }
}

/// Incremental echelon form with pivots at the smallest index of each stored vector.
#[derive(Clone, Debug)]
pub struct Echelon {
    track: bool,
    /// pivot index ↦ (vector with entry 1 at the pivot, combination of inserted columns)
    pivots: BTreeMap<usize, (SparseVec, SparseVec)>,
}

impl Echelon {
    pub fn new(track: bool) -> Self {
        Echelon {
            track,
            pivots: BTreeMap::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivot_indices(&self) -> impl Iterator<Item = &usize> {
        self.pivots.keys()
    }

    /// Reduces `v` against the pivots in ascending order. Returns the residual,
    /// which vanishes at every pivot index, and (when tracking) the combination `c`
    /// with `v = residual + Σ c_j col_j`.
    pub fn reduce(&self, mut v: SparseVec) -> (SparseVec, SparseVec) {
        let mut combo = SparseVec::new();
        let mut cursor = 0usize;
        loop {
            let next = v
                .range(cursor..)
                .map(|(&i, _)| i)
                .find(|i| self.pivots.contains_key(i));
            let Some(i) = next else { break };
            let c = v[&i].clone();
            let (pv, pc) = &self.pivots[&i];
            axpy(&mut v, &-c.clone(), pv);
            if self.track {
                axpy(&mut combo, &c, pc);
            }
            cursor = i + 1;
        }
        (v, combo)
    }

    /// Inserts column `v` (with label `j` for tracking). Returns `Some(kernel vector)`
    /// when `v` depends on the earlier columns; the kernel vector is only meaningful
    /// when tracking.
    pub fn insert(&mut self, v: SparseVec, j: usize) -> Option<SparseVec> {
        let (mut r, mut combo) = self.reduce(v);
        if r.is_empty() {
            let mut k = SparseVec::new();
            k.insert(j, Scalar::one());
            axpy(&mut k, &-Scalar::one(), &combo);
            return Some(k);
        }
        let (&piv, lead) = r.iter().next().expect("nonempty residual");
        let inv = lead.recip();
        scale_vec(&mut r, &inv);
        if self.track {
            // r = (v - Σ combo) / lead
            scale_vec(&mut combo, &-inv.clone());
            combo.insert(j, inv.clone());
            combo.retain(|_, x| !x.is_zero());
        }
        self.pivots.insert(piv, (r, combo));
        None
    }

    /// A particular solution of `A x = b` for the inserted columns, if any.
    pub fn solve(&self, b: &SparseVec) -> Option<SparseVec> {
        let (r, combo) = self.reduce(b.clone());
        r.is_empty().then_some(combo)
    }
}

/// `p`-adically orthogonal basis: every stored vector has entry 1 at its pivot,
/// zeros at all other pivots, and norm equal to the weight of its pivot.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    prime: Prime,
    weights: Vec<i64>,
    vecs: Vec<(usize, SparseVec)>,
}

impl OrthoBasis {
    pub fn new(prime: Prime, weights: Vec<i64>) -> Self {
        OrthoBasis {
            prime,
            weights,
            vecs: Vec::new(),
        }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn dim(&self) -> usize {
        self.vecs.len()
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn vectors(&self) -> impl Iterator<Item = &(usize, SparseVec)> {
        self.vecs.iter()
    }

    pub fn pivots(&self) -> Vec<usize> {
        self.vecs.iter().map(|(p, _)| *p).collect()
    }

    pub fn norm(&self, v: &SparseVec) -> LogNorm {
        weighted_norm(v, &self.weights, self.prime)
    }

    /// Subtracts the span component; the result vanishes at every pivot and its
    /// norm is the quotient norm of `v`.
    pub fn reduce(&self, v: &SparseVec) -> SparseVec {
        let mut out = v.clone();
        for (piv, b) in &self.vecs {
            if let Some(c) = out.get(piv).cloned() {
                axpy(&mut out, &-c, b);
            }
        }
        out
    }

    pub fn quotient_norm(&self, v: &SparseVec) -> LogNorm {
        self.norm(&self.reduce(v))
    }

    /// Coordinates of a span element in the stored basis (its entries at the pivots).
    pub fn coordinates(&self, v: &SparseVec) -> Vec<Scalar> {
        self.vecs
            .iter()
            .map(|(piv, _)| v.get(piv).cloned().unwrap_or_else(Scalar::zero))
            .collect()
    }

    /// Adds `v` to the span; returns `false` when it was already contained.
    pub fn insert(&mut self, v: &SparseVec) -> bool {
        let mut r = self.reduce(v);
        if r.is_empty() {
            return false;
        }
        let p = self.prime.get();
        let (piv, lead) = r
            .iter()
            .map(|(&i, c)| (i, c, log_norm(c, p).shift(self.weights[i])))
            .fold(None::<(usize, &Scalar, LogNorm)>, |best, cur| match best {
                Some(b) if b.2 >= cur.2 => Some(b),
                _ => Some(cur),
            })
            .map(|(i, c, _)| (i, c.clone()))
            .expect("nonempty residual");
        scale_vec(&mut r, &lead.recip());
        for (_, b) in &mut self.vecs {
            if let Some(c) = b.get(&piv).cloned() {
                axpy(b, &-c, &r);
            }
        }
        self.vecs.push((piv, r));
        true
    }
}

/// Rank over `F_p` of a matrix given by rows of residues.
pub fn fp_rank(rows: &[Vec<u64>], p: u64) -> usize {
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|x| x % p).collect()).collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..ncols {
        let Some(r) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, r);
        let inv = crate::padic::inv_mod(m[rank][c], p);
        for x in m[rank].iter_mut() {
            *x = *x * inv % p;
        }
        let pivot = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && row[c] != 0 {
                let f = row[c];
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x = (*x + p - f * y % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::scalar_from_i64;
    use proptest::prelude::*;

    fn p5() -> Prime {
        Prime::new(5).unwrap()
    }

    fn dense(rows: &[&[i64]]) -> SparseMatrix {
        let ncols = rows[0].len();
        SparseMatrix::from_rows(
            &rows
                .iter()
                .map(|r| r.iter().map(|&x| scalar_from_i64(x)).collect())
                .collect::<Vec<_>>(),
            ncols,
        )
    }

    /// Rank by textbook dense Gaussian elimination.
    fn dense_rank(rows: &[Vec<Scalar>]) -> usize {
        let mut a: Vec<Vec<Scalar>> = rows.to_vec();
        let ncols = a.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..ncols {
            let Some(r) = (rank..a.len()).find(|&r| !a[r][c].is_zero()) else {
                continue;
            };
            a.swap(rank, r);
            for r2 in 0..a.len() {
                if r2 != rank && !a[r2][c].is_zero() {
                    let f = &a[r2][c] / &a[rank][c];
                    for k in 0..ncols {
                        let t = &f * &a[rank][k];
                        a[r2][k] -= t;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn rank_and_kernel() {
        let m = dense(&[&[1, 2, 3], &[2, 4, 6], &[0, 0, 1]]);
        assert_eq!(m.rank(), 2);
        let k = m.kernel();
        assert_eq!(k.len(), 1);
        assert!(m.apply(&k[0]).is_empty());
    }

    #[test]
    fn solve_particular() {
        let m = dense(&[&[1, 1], &[0, 5]]);
        let mut e = Echelon::new(true);
        for j in 0..2 {
            e.insert(m.column(j).clone(), j);
        }
        let b = from_dense(&[scalar_from_i64(3), scalar_from_i64(10)]);
        let x = e.solve(&b).unwrap();
        assert_eq!(m.apply(&x), b);
    }

    #[test]
    fn quotient_norm_line() {
        // span of (1, 5) in weights (0, 0); the class of (0, 1) has norm |1| = p^0
        let mut o = OrthoBasis::new(p5(), vec![0, 0]);
        o.insert(&from_dense(&[Scalar::one(), scalar_from_i64(5)]));
        assert_eq!(o.quotient_norm(&from_dense(&[Scalar::zero(), Scalar::one()])), LogNorm::Finite(0));
        // the class of (1, 0) is -(0, 5), norm p^{-1}
        assert_eq!(o.quotient_norm(&from_dense(&[Scalar::one(), Scalar::zero()])), LogNorm::Finite(-1));
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<i64>>> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(-3i64..4, c), r)
        })
    }

    proptest! {
        #[test]
        fn rank_matches_dense(rows in arb_matrix()) {
            let s: Vec<Vec<Scalar>> = rows.iter().map(|r| r.iter().map(|&x| scalar_from_i64(x)).collect()).collect();
            let m = SparseMatrix::from_rows(&s, rows[0].len());
            prop_assert_eq!(m.rank(), dense_rank(&s));
            prop_assert_eq!(m.rank() + m.kernel().len(), m.ncols());
            prop_assert_eq!(m.transpose().rank(), m.rank());
        }

        /// Brute-force check of the quotient norm over small coefficient shifts.
        #[test]
        fn ortho_reduction_is_minimal(
            rows in proptest::collection::vec(proptest::collection::vec(-30i64..30, 3), 1..3),
            v in proptest::collection::vec(-30i64..30, 3),
            w in proptest::collection::vec(-2i64..3, 3),
        ) {
            let mut o = OrthoBasis::new(p5(), w.clone());
            let vecs: Vec<SparseVec> = rows.iter().map(|r| from_dense(&r.iter().map(|&x| scalar_from_i64(x)).collect::<Vec<_>>())).collect();
            for b in &vecs { o.insert(b); }
            let target = from_dense(&v.iter().map(|&x| scalar_from_i64(x)).collect::<Vec<_>>());
            let q = o.quotient_norm(&target);
            for (_, b) in o.vectors() {
                prop_assert_eq!(o.norm(b), LogNorm::Finite(w[o.vectors().find(|(_, c)| c == b).unwrap().0]));
            }
            // no perturbation by small multiples of the spanning vectors beats the reduction
            for a in -5i64..=5 {
                for b in -5i64..=5 {
                    let mut t = target.clone();
                    axpy(&mut t, &scalar_from_i64(a), &vecs[0]);
                    if vecs.len() > 1 { axpy(&mut t, &Scalar::new(b.into(), 5.into()), &vecs[1]); }
                    prop_assert!(q <= o.norm(&t));
                }
            }
        }
    }
}
