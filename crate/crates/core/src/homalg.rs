//! Truncated Banach complexes and the diagnostics run on them.
//!
//! Every space is monomial-weighted: a basis with `log_p` norms `w_i`, and
//! `|Σ c_i e_i| = max_i (log|c_i| + w_i)`. Cohomology is reported as a left-heart
//! pair `coim d^{j-1} → ker d^j` with quotient and subspace norms. Strictness is
//! diagnosed along a ladder of caps, since at any single cap every map is strict.

use std::collections::BTreeMap;

use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{axpy, fp_rank, weighted_norm, Echelon, OrthoBasis, SparseMatrix, SparseVec};
use crate::padic::{log_norm, residue, LogNorm, Prime, Scalar};
use crate::tate::{laurent_split, LaurentWindow, MultiIndex, TateSeries};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncBanach {
    prime: Prime,
    labels: Vec<String>,
    weights: Vec<i64>,
}

impl TruncBanach {
    pub fn new(prime: Prime, labels: Vec<String>, weights: Vec<i64>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} weights",
                labels.len(),
                weights.len()
            )));
        }
        Ok(TruncBanach {
            prime,
            labels,
            weights,
        })
    }

    pub fn zero(prime: Prime) -> Self {
        TruncBanach {
            prime,
            labels: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Unit-weight space `K^d` with labels `e0, e1, …`.
    pub fn standard(prime: Prime, d: usize) -> Self {
        TruncBanach {
            prime,
            labels: (0..d).map(|i| format!("e{i}")).collect(),
            weights: vec![0; d],
        }
    }

    pub fn prime(&self) -> Prime {
        self.prime
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> i64 {
        self.weights[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn norm(&self, v: &SparseVec) -> LogNorm {
        weighted_norm(v, &self.weights, self.prime)
    }

    /// Sub-space spanned by the listed coordinates.
    fn select(&self, idx: &[usize]) -> TruncBanach {
        TruncBanach {
            prime: self.prime,
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedMap {
    source: TruncBanach,
    target: TruncBanach,
    matrix: SparseMatrix,
}

impl BoundedMap {
    pub fn new(source: TruncBanach, target: TruncBanach, matrix: SparseMatrix) -> Result<Self> {
        if matrix.ncols() != source.dim() || matrix.nrows() != target.dim() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix between spaces of dimension {} and {}",
                matrix.nrows(),
                matrix.ncols(),
                source.dim(),
                target.dim()
            )));
        }
        Ok(BoundedMap {
            source,
            target,
            matrix,
        })
    }

    pub fn zero(source: TruncBanach, target: TruncBanach) -> Self {
        let matrix = SparseMatrix::zeros(target.dim(), source.dim());
        BoundedMap {
            source,
            target,
            matrix,
        }
    }

    pub fn identity(space: TruncBanach) -> Self {
        let matrix = SparseMatrix::identity(space.dim());
        BoundedMap {
            source: space.clone(),
            target: space,
            matrix,
        }
    }

    pub fn source(&self) -> &TruncBanach {
        &self.source
    }

    pub fn target(&self) -> &TruncBanach {
        &self.target
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        self.matrix.apply(v)
    }

    /// `max_{i,j} (log|a_ij| + w_target(i) - w_source(j))`.
    pub fn op_norm(&self) -> LogNorm {
        let p = self.source.prime.get();
        self.matrix
            .columns()
            .iter()
            .enumerate()
            .flat_map(|(j, col)| {
                col.iter().map(move |(&i, a)| {
                    log_norm(a, p).shift(self.target.weights[i] - self.source.weights[j])
                })
            })
            .max()
            .unwrap_or(LogNorm::NegInf)
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &BoundedMap) -> Result<BoundedMap> {
        if first.target.dim() != self.source.dim() {
            return Err(Error::Dimension("composition of incompatible maps".into()));
        }
        Ok(BoundedMap {
            source: first.source.clone(),
            target: self.target.clone(),
            matrix: self.matrix.compose(&first.matrix),
        })
    }
}

/// Chain complex `C^{lowest} → C^{lowest+1} → …` with `d ∘ d = 0` checked on construction.
#[derive(Clone, Debug)]
pub struct Complex {
    lowest: i64,
    spaces: Vec<TruncBanach>,
    maps: Vec<BoundedMap>,
}

impl Complex {
    pub fn new(lowest: i64, spaces: Vec<TruncBanach>, maps: Vec<BoundedMap>) -> Result<Self> {
        if spaces.is_empty() || maps.len() + 1 != spaces.len() {
            return Err(Error::Dimension(format!(
                "{} maps for {} spaces",
                maps.len(),
                spaces.len()
            )));
        }
        for (k, f) in maps.iter().enumerate() {
            if f.source.dim() != spaces[k].dim() || f.target.dim() != spaces[k + 1].dim() {
                return Err(Error::Dimension(format!("differential {k} has the wrong shape")));
            }
        }
        let c = Complex {
            lowest,
            spaces,
            maps,
        };
        if !c.composition_is_zero() {
            return Err(Error::Invalid("consecutive differentials do not compose to zero".into()));
        }
        Ok(c)
    }

    pub fn lowest(&self) -> i64 {
        self.lowest
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.iter().all(|s| s.dim() == 0)
    }

    pub fn space(&self, k: usize) -> &TruncBanach {
        &self.spaces[k]
    }

    pub fn spaces(&self) -> &[TruncBanach] {
        &self.spaces
    }

    pub fn map(&self, k: usize) -> &BoundedMap {
        &self.maps[k]
    }

    pub fn maps(&self) -> &[BoundedMap] {
        &self.maps
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(TruncBanach::dim).collect()
    }

    pub fn composition_is_zero(&self) -> bool {
        self.maps
            .windows(2)
            .all(|w| w[1].matrix.compose(&w[0].matrix).is_zero())
    }

    fn position(&self, degree: i64) -> Result<usize> {
        let k = degree - self.lowest;
        if k < 0 || k as usize >= self.spaces.len() {
            return Err(Error::Invalid(format!("degree {degree} outside the complex")));
        }
        Ok(k as usize)
    }

    /// `d^{j-1}`, the zero map from the zero space at the left end.
    pub fn incoming(&self, degree: i64) -> Result<BoundedMap> {
        let k = self.position(degree)?;
        Ok(if k == 0 {
            BoundedMap::zero(TruncBanach::zero(self.spaces[0].prime), self.spaces[0].clone())
        } else {
            self.maps[k - 1].clone()
        })
    }

    /// `d^j`, the zero map to the zero space at the right end.
    pub fn outgoing(&self, degree: i64) -> Result<BoundedMap> {
        let k = self.position(degree)?;
        Ok(if k == self.maps.len() {
            BoundedMap::zero(self.spaces[k].clone(), TruncBanach::zero(self.spaces[k].prime))
        } else {
            self.maps[k].clone()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "STRICT")]
    Strict,
    #[serde(rename = "NON-STRICT")]
    NonStrict,
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn from_pass(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Orthogonal basis of `ker f` in the source norm.
pub fn kernel_basis(f: &BoundedMap) -> OrthoBasis {
    let mut o = OrthoBasis::new(f.source.prime, f.source.weights.clone());
    for k in f.matrix.kernel() {
        o.insert(&k);
    }
    o
}

/// Minimal-norm preimages under a fixed map.
pub struct PreimageSolver<'a> {
    map: &'a BoundedMap,
    echelon: Echelon,
    kernel: OrthoBasis,
}

impl<'a> PreimageSolver<'a> {
    pub fn new(map: &'a BoundedMap) -> Self {
        let mut echelon = Echelon::new(true);
        let mut kernel = OrthoBasis::new(map.source.prime, map.source.weights.clone());
        for (j, col) in map.matrix.columns().iter().enumerate() {
            if let Some(k) = echelon.insert(col.clone(), j) {
                kernel.insert(&k);
            }
        }
        PreimageSolver {
            map,
            echelon,
            kernel,
        }
    }

    pub fn kernel(&self) -> &OrthoBasis {
        &self.kernel
    }

    pub fn rank(&self) -> usize {
        self.echelon.rank()
    }

    pub fn in_image(&self, b: &SparseVec) -> bool {
        self.echelon.reduce(b.clone()).0.is_empty()
    }

    /// A preimage of `b` of least norm, with that norm.
    pub fn min_norm_preimage(&self, b: &SparseVec) -> Option<(SparseVec, LogNorm)> {
        let x0 = self.echelon.solve(b)?;
        let x = self.kernel.reduce(&x0);
        let n = self.map.source.norm(&x);
        Some((x, n))
    }
}

/// `max_i (|minimal preimage of e_i| - w_i)` over target basis vectors in the image.
pub fn preimage_profile(f: &BoundedMap) -> LogNorm {
    let solver = PreimageSolver::new(f);
    (0..f.target.dim())
        .filter_map(|i| {
            let mut e = SparseVec::new();
            e.insert(i, Scalar::one());
            solver
                .min_norm_preimage(&e)
                .map(|(_, n)| n.shift(-f.target.weight(i)))
        })
        .max()
        .unwrap_or(LogNorm::NegInf)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StrictnessReport {
    pub caps: Vec<usize>,
    pub profile: Vec<LogNorm>,
    pub verdict: Verdict,
}

/// Compares preimage profiles along a ladder of caps: growth from the first to the
/// last cap is reported as NON-STRICT.
pub fn strictness_report(ladder: &[(usize, BoundedMap)]) -> StrictnessReport {
    let caps: Vec<usize> = ladder.iter().map(|(c, _)| *c).collect();
    let profile: Vec<LogNorm> = ladder.iter().map(|(_, f)| preimage_profile(f)).collect();
    let verdict = match (profile.first(), profile.last()) {
        (Some(a), Some(b)) if b > a => Verdict::NonStrict,
        _ => Verdict::Strict,
    };
    StrictnessReport {
        caps,
        profile,
        verdict,
    }
}

/// Whether the class of the test vector in `coker f` vanishes from some stage on.
pub fn limit_cokernel_class(stages: &[(BoundedMap, SparseVec)]) -> bool {
    let hits: Vec<bool> = stages
        .iter()
        .map(|(f, v)| {
            let mut e = Echelon::new(false);
            for (j, c) in f.matrix.columns().iter().enumerate() {
                e.insert(c.clone(), j);
            }
            e.reduce(v.clone()).0.is_empty()
        })
        .collect();
    match hits.iter().position(|&h| h) {
        Some(first) => hits[first..].iter().all(|&h| h),
        None => false,
    }
}

/// The pair `coim d^{j-1} → ker d^j`.
#[derive(Clone, Debug)]
pub struct LeftHeartObject {
    pub degree: i64,
    pub coimage: TruncBanach,
    pub kernel: TruncBanach,
    pub map: BoundedMap,
    pub is_strict: bool,
    /// `ker d^j / im d^{j-1}` with quotient norms.
    pub classical_part: TruncBanach,
}

impl LeftHeartObject {
    pub fn classical_dim(&self) -> usize {
        self.classical_part.dim()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.coimage.dim() == 0 && self.kernel.dim() == 0
    }
}

/// Cohomology at one cap with a given strictness flag.
pub fn cohomology_object(c: &Complex, degree: i64, is_strict: bool) -> Result<LeftHeartObject> {
    let d_in = c.incoming(degree)?;
    let d_out = c.outgoing(degree)?;
    let prime = d_in.target.prime;

    let ker_in = kernel_basis(&d_in);
    let pivots_in: std::collections::BTreeSet<usize> = ker_in.pivots().into_iter().collect();
    let coim_idx: Vec<usize> = (0..d_in.source.dim())
        .filter(|i| !pivots_in.contains(i))
        .collect();
    let coimage = d_in.source.select(&coim_idx);

    let ker_out = kernel_basis(&d_out);
    let kernel = TruncBanach::new(
        prime,
        ker_out
            .vectors()
            .map(|(piv, _)| format!("ker[{}]", d_out.source.label(*piv)))
            .collect(),
        ker_out
            .vectors()
            .map(|(piv, _)| d_out.source.weight(*piv))
            .collect(),
    )?;

    let mut mat = SparseMatrix::zeros(kernel.dim(), coimage.dim());
    for (col, &i) in coim_idx.iter().enumerate() {
        let img = d_in.matrix.column(i);
        for (row, x) in ker_out.coordinates(img).into_iter().enumerate() {
            mat.add_entry(row, col, x);
        }
    }
    let map = BoundedMap::new(coimage.clone(), kernel.clone(), mat)?;

    let mut image = OrthoBasis::new(prime, kernel.weights.clone());
    for col in map.matrix.columns() {
        image.insert(col);
    }
    let img_pivots: std::collections::BTreeSet<usize> = image.pivots().into_iter().collect();
    let cls_idx: Vec<usize> = (0..kernel.dim())
        .filter(|i| !img_pivots.contains(i))
        .collect();
    let classical_part = kernel.select(&cls_idx);

    Ok(LeftHeartObject {
        degree,
        coimage,
        kernel,
        map,
        is_strict,
        classical_part,
    })
}

/// Cohomology in `degree` at every cap of a ladder, flagged by the strictness
/// verdict of the incoming differential along the ladder.
pub fn cohomology(ladder: &[(usize, Complex)], degree: i64) -> Result<(Vec<LeftHeartObject>, StrictnessReport)> {
    let incoming = ladder
        .iter()
        .map(|(cap, c)| Ok((*cap, c.incoming(degree)?)))
        .collect::<Result<Vec<_>>>()?;
    let report = strictness_report(&incoming);
    let strict = report.verdict == Verdict::Strict;
    let objs = ladder
        .iter()
        .map(|(_, c)| cohomology_object(c, degree, strict))
        .collect::<Result<Vec<_>>>()?;
    Ok((objs, report))
}

/// Number of kernel directions whose unit-normalized representatives vanish mod `p`
/// on the tail coordinates.
///
/// Each basis vector of the orthogonal kernel basis is scaled to norm 1; its
/// normalized tail coordinates `c_i p^{-w_i}` are then reduced to `F_p`.
pub fn bounded_kernel_dim(kernel: &OrthoBasis, tail: impl Fn(usize) -> bool) -> usize {
    let p = kernel_prime(kernel);
    let weights = kernel.weights().to_vec();
    let tail_idx: Vec<usize> = (0..weights.len()).filter(|&i| tail(i)).collect();
    let rows: Vec<Vec<u64>> = kernel
        .vectors()
        .map(|(_, v)| {
            let norm = kernel.norm(v).finite().expect("basis vectors are nonzero");
            tail_idx
                .iter()
                .map(|&i| match v.get(&i) {
                    None => 0,
                    Some(c) => {
                        let scaled = c * p.pow(norm - weights[i]);
                        residue(&scaled, p.get()).expect("normalized coordinates are integral")
                    }
                })
                .collect()
        })
        .collect();
    kernel.dim() - fp_rank(&rows, p.get())
}

fn kernel_prime(o: &OrthoBasis) -> Prime {
    o.prime()
}

/// Per-stage `log_p` radii of a norm ball in a tower.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundedBall {
    pub radii: Vec<i64>,
}

/// Declared pre-nuclearity witness: radius `R(n, r, e)` at stage `n + 2` such that
/// the `r`-ball of `V_{n+1}` lies in `U_e + ρ_{n+1}(B_R)` after pushing to `V_n`,
/// where `U_e` is the open `e`-ball.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessSchedule {
    /// `R = r`.
    Uniform,
    /// `R = r + clamp(r - e, 0, dim - 1)`: the head of a degree-weighted vector
    /// through degree `r - e`.
    DegreeHead { dim: usize },
    /// A schedule lowered by a constant.
    Lowered(Box<WitnessSchedule>, i64),
}

impl WitnessSchedule {
    pub fn radius(&self, n: usize, r: i64, e: i64) -> i64 {
        match self {
            WitnessSchedule::Uniform => r,
            WitnessSchedule::DegreeHead { dim } => r + (r - e).clamp(0, *dim as i64 - 1),
            WitnessSchedule::Lowered(base, k) => base.radius(n, r, e) - k,
        }
    }
}

/// `V_0 ← V_1 ← … ← V_N` with `transitions[n]: V_{n+1} → V_n`.
#[derive(Clone, Debug)]
pub struct InverseSystem {
    spaces: Vec<TruncBanach>,
    transitions: Vec<BoundedMap>,
    witness: Option<WitnessSchedule>,
}

impl InverseSystem {
    pub fn new(
        spaces: Vec<TruncBanach>,
        transitions: Vec<SparseMatrix>,
        witness: Option<WitnessSchedule>,
    ) -> Result<Self> {
        if spaces.len() < 2 || transitions.len() + 1 != spaces.len() {
            return Err(Error::Dimension("a tower needs N+1 spaces and N transitions".into()));
        }
        let transitions = transitions
            .into_iter()
            .enumerate()
            .map(|(n, m)| BoundedMap::new(spaces[n + 1].clone(), spaces[n].clone(), m))
            .collect::<Result<Vec<_>>>()?;
        Ok(InverseSystem {
            spaces,
            transitions,
            witness,
        })
    }

    /// Stages `V_n = K<x>` truncated to `dim` coefficients with weights `n·j`, each
    /// transition the identity on coefficients.
    pub fn kx_tower(prime: Prime, stages: usize, dim: usize, witness: Option<WitnessSchedule>) -> Result<Self> {
        let spaces = (0..=stages)
            .map(|n| {
                TruncBanach::new(
                    prime,
                    (0..dim).map(|j| format!("x^{j}")).collect(),
                    (0..dim).map(|j| (n * j) as i64).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(spaces, vec![SparseMatrix::identity(dim); stages], witness)
    }

    /// All stages `K^dim` with unit weights and identity transitions.
    pub fn identity_tower(prime: Prime, stages: usize, dim: usize, witness: Option<WitnessSchedule>) -> Result<Self> {
        Self::new(
            vec![TruncBanach::standard(prime, dim); stages + 1],
            vec![SparseMatrix::identity(dim); stages],
            witness,
        )
    }

    /// Index `N` of the last stage.
    pub fn top(&self) -> usize {
        self.spaces.len() - 1
    }

    pub fn space(&self, n: usize) -> &TruncBanach {
        &self.spaces[n]
    }

    pub fn witness(&self) -> Option<&WitnessSchedule> {
        self.witness.as_ref()
    }

    /// `ρ_i ∘ … ∘ ρ_{k-1}: V_k → V_i`.
    pub fn push(&self, v: &SparseVec, k: usize, i: usize) -> SparseVec {
        let mut out = v.clone();
        for n in (i..k).rev() {
            out = self.transitions[n].apply(&out);
        }
        out
    }

    fn chain_norm(&self, k: usize, i: usize) -> LogNorm {
        if k == i {
            return LogNorm::Finite(0);
        }
        let mut f = self.transitions[k - 1].clone();
        for n in (i..k - 1).rev() {
            f = self.transitions[n].after(&f).expect("tower maps compose");
        }
        f.op_norm()
    }

    /// `(y_0 - ρ(y_1), …, y_{N-1} - ρ(y_N))`.
    pub fn roos_map(&self, y: &[SparseVec]) -> Result<Vec<SparseVec>> {
        if y.len() != self.spaces.len() {
            return Err(Error::Dimension("Roos map takes one vector per stage".into()));
        }
        Ok((0..self.top())
            .map(|n| {
                let mut out = y[n].clone();
                axpy(&mut out, &-Scalar::one(), &self.transitions[n].apply(&y[n + 1]));
                out
            })
            .collect())
    }

    /// Components of `z ∈ V_{n+1}` whose image in `V_n` already has norm below `e`
    /// are dropped; the rest is lifted to `V_{n+2}` by a minimal-norm solve.
    fn lift_head(&self, n: usize, z: &SparseVec, e: i64) -> Result<SparseVec> {
        let rho = &self.transitions[n];
        let mut head = SparseVec::new();
        for (&j, c) in z {
            let mut single = SparseVec::new();
            single.insert(j, c.clone());
            if rho.target.norm(&rho.apply(&single)) >= LogNorm::Finite(e) {
                head.insert(j, c.clone());
            }
        }
        let next = &self.transitions[n + 1];
        let solver = PreimageSolver::new(next);
        let (u, _) = solver.min_norm_preimage(&head).ok_or(Error::NotInImage)?;
        let mut gap = z.clone();
        axpy(&mut gap, &-Scalar::one(), &next.apply(&u));
        if rho.target.norm(&rho.apply(&gap)) >= LogNorm::Finite(e) {
            return Err(Error::Invalid(format!(
                "lift at stage {n} misses the tolerance p^{e}"
            )));
        }
        Ok(u)
    }
}

/// Output of [`roos_preimage`].
#[derive(Clone, Debug, Serialize)]
pub struct RoosPreimage {
    #[serde(skip)]
    pub preimage: Vec<SparseVec>,
    /// a-priori bound on `|y_i|` at every stage
    pub certificate: Vec<LogNorm>,
    pub actual: Vec<LogNorm>,
    /// declared witness radii `R_n` of the corrections
    pub witness_radii: Vec<i64>,
    pub correction_norms: Vec<LogNorm>,
}

impl RoosPreimage {
    pub fn dominated(&self) -> bool {
        self.actual.iter().zip(&self.certificate).all(|(a, c)| a <= c)
    }
}

/// Constructive preimage under the truncated Roos map.
///
/// Starts from the naive partial sums `w_n` and corrects them stage by stage: the
/// discrepancy `σ(w_{n+1}) - w'_n` is diagonal, given by `z ∈ V_{n+1}`; a
/// correction `u ∈ V_{n+2}` approximating `z` to within `p^{-n}` in `V_n` is drawn
/// from the witness ball and subtracted diagonally.
pub fn roos_preimage(s: &InverseSystem, target: &[SparseVec], ball: &BoundedBall) -> Result<RoosPreimage> {
    let witness = s.witness.as_ref().ok_or(Error::MissingWitness)?;
    let top = s.top();
    if target.len() != top || ball.radii.len() < top {
        return Err(Error::Dimension(format!(
            "target needs {top} stages and the ball {top} radii"
        )));
    }
    for (n, v) in target.iter().enumerate() {
        if s.spaces[n].norm(v) > LogNorm::Finite(ball.radii[n]) {
            return Err(Error::Unbounded(n));
        }
    }
    // w_n ∈ V_0 × … × V_{n+1}
    let naive = |n: usize| -> Vec<SparseVec> {
        let mut w: Vec<SparseVec> = (0..=n)
            .map(|i| {
                let mut acc = SparseVec::new();
                for (k, v) in target.iter().enumerate().take(n + 1).skip(i) {
                    axpy(&mut acc, &Scalar::one(), &s.push(v, k, i));
                }
                acc
            })
            .collect();
        w.push(SparseVec::new());
        w
    };
    let mut current = naive(0);
    let mut radii = Vec::new();
    let mut correction_norms = Vec::new();
    let mut prev_radius: Option<i64> = None;
    for n in 0..top.saturating_sub(1) {
        let next = naive(n + 1);
        let z = {
            let mut z = next[n + 1].clone();
            axpy(&mut z, &-Scalar::one(), &current[n + 1]);
            z
        };
        for i in 0..=n {
            let mut x = next[i].clone();
            axpy(&mut x, &-Scalar::one(), &current[i]);
            if x != s.push(&z, n + 1, i) {
                return Err(Error::Invalid(format!("discrepancy at stage {n} is not diagonal")));
            }
        }
        let r = prev_radius.map_or(ball.radii[n + 1], |rp| rp.max(ball.radii[n + 1]));
        let e = -(n as i64);
        let u = s.lift_head(n, &z, e)?;
        let declared = witness.radius(n, r, e);
        let actual = s.spaces[n + 2].norm(&u);
        if actual > LogNorm::Finite(declared) {
            return Err(Error::WitnessViolated {
                stage: n,
                declared: declared.to_string(),
                needed: actual.to_string(),
            });
        }
        radii.push(declared);
        correction_norms.push(actual);
        prev_radius = Some(declared);
        current = next;
        for i in 0..=n + 2 {
            let d = s.push(&u, n + 2, i);
            axpy(&mut current[i], &-Scalar::one(), &d);
        }
    }
    let certificate = (0..=top)
        .map(|i| {
            let from_target = (i..top)
                .map(|k| s.chain_norm(k, i).shift(ball.radii[k]))
                .max()
                .unwrap_or(LogNorm::NegInf);
            let from_witness = radii
                .last()
                .map_or(LogNorm::NegInf, |&r| s.chain_norm(top, i).shift(r));
            from_target.max(from_witness)
        })
        .collect();
    let actual = current
        .iter()
        .enumerate()
        .map(|(i, y)| s.spaces[i].norm(y))
        .collect();
    Ok(RoosPreimage {
        preimage: current,
        certificate,
        actual,
        witness_radii: radii,
        correction_norms,
    })
}

/// First generator for which the declared witness radius was not enough.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub stage: usize,
    pub radius: i64,
    pub tolerance: i64,
    pub generator: String,
    pub declared: i64,
    pub needed: LogNorm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrenuclearVerdict {
    pub verdict: Verdict,
    pub checked: usize,
    pub counterexample: Option<Counterexample>,
}

/// A sampled instance of the pre-nuclearity condition: stage `n`, ball radius `r`
/// in `V_{n+1}`, open tolerance `e` in `V_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrenuclearSample {
    pub stage: usize,
    pub radius: i64,
    pub tolerance: i64,
}

/// Checks the declared witness on the lattice generators `p^{w_j - r} e_j` of each
/// sampled ball. Both sides of the condition are `R`-modules, so generators suffice.
pub fn prenuclear_check(s: &InverseSystem, samples: &[PrenuclearSample]) -> Result<PrenuclearVerdict> {
    let witness = s.witness.as_ref().ok_or(Error::MissingWitness)?;
    let prime = s.spaces[0].prime;
    let mut checked = 0;
    for smp in samples {
        if smp.stage + 2 > s.top() {
            return Err(Error::Invalid(format!(
                "sample stage {} needs stage {} in the tower",
                smp.stage,
                smp.stage + 2
            )));
        }
        let space = &s.spaces[smp.stage + 1];
        let declared = witness.radius(smp.stage, smp.radius, smp.tolerance);
        for j in 0..space.dim() {
            let mut g = SparseVec::new();
            g.insert(j, prime.pow(space.weight(j) - smp.radius));
            let u = s.lift_head(smp.stage, &g, smp.tolerance)?;
            let needed = s.spaces[smp.stage + 2].norm(&u);
            checked += 1;
            if needed > LogNorm::Finite(declared) {
                return Ok(PrenuclearVerdict {
                    verdict: Verdict::Fail,
                    checked,
                    counterexample: Some(Counterexample {
                        stage: smp.stage,
                        radius: smp.radius,
                        tolerance: smp.tolerance,
                        generator: space.label(j).to_string(),
                        declared,
                        needed,
                    }),
                });
            }
        }
    }
    Ok(PrenuclearVerdict {
        verdict: Verdict::Pass,
        checked,
        counterexample: None,
    })
}

/// Built-in coverings of the closed unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Covering {
    /// `U₁ = {|x| ≤ |p|}`, `U₂ = {|p| ≤ |x| ≤ 1}`, overlap the circle `|x| = |p|`.
    DiskTwoCover,
    /// The disk itself.
    DiskTrivial,
}

impl Covering {
    pub const ALL: [Covering; 2] = [Covering::DiskTwoCover, Covering::DiskTrivial];

    pub fn id(self) -> &'static str {
        match self {
            Covering::DiskTwoCover => "disk_two_cover",
            Covering::DiskTrivial => "disk_trivial",
        }
    }

    pub fn parse(s: &str) -> Result<Covering> {
        Self::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::Unsupported(format!("covering {s:?}")))
    }
}

/// Sheaf on the disk: `O` or a free module of the given rank (a connection module
/// viewed as an `O`-module).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SheafSpec {
    Structure,
    Free { rank: usize },
}

impl SheafSpec {
    pub fn rank(self) -> usize {
        match self {
            SheafSpec::Structure => 1,
            SheafSpec::Free { rank } => rank,
        }
    }
}

fn disk_space(prime: Prime, tag: &str, exps: impl Iterator<Item = i64>, weight: impl Fn(i64) -> i64, rank: usize) -> Result<TruncBanach> {
    let exps: Vec<i64> = exps.collect();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for l in 0..rank {
        for &j in &exps {
            labels.push(if rank == 1 {
                format!("{tag}:x^{j}")
            } else {
                format!("{tag}:e{l}*x^{j}")
            });
            weights.push(weight(j));
        }
    }
    TruncBanach::new(prime, labels, weights)
}

/// Truncated Čech complex of the covering with coefficients in the sheaf.
///
/// On the two-cover, `O(U₁)` has basis `x^j` (`0 ≤ j ≤ D`, weight `-j`), `O(U₂)`
/// has `x^j` (`-D ≤ j ≤ D`, weight `max(0, -j)`) and the overlap has `x^j`
/// (`-D ≤ j ≤ D`, weight `-j`); the differential is `(f₁, f₂) ↦ f₂ - f₁`.
pub fn cech_complex(cover: Covering, sheaf: SheafSpec, deg_cap: usize, prime: Prime) -> Result<Complex> {
    let d = deg_cap as i64;
    let rank = sheaf.rank();
    match cover {
        Covering::DiskTrivial => {
            let s = disk_space(prime, "X", 0..=d, |_| 0, rank)?;
            Complex::new(0, vec![s], vec![])
        }
        Covering::DiskTwoCover => {
            let u1 = disk_space(prime, "U1", 0..=d, |j| -j, rank)?;
            let u2 = disk_space(prime, "U2", -d..=d, |j| (-j).max(0), rank)?;
            let u12 = disk_space(prime, "U12", -d..=d, |j| -j, rank)?;
            let mut labels = u1.labels.clone();
            labels.extend(u2.labels.iter().cloned());
            let mut weights = u1.weights.clone();
            weights.extend(u2.weights.iter().cloned());
            let c0 = TruncBanach::new(prime, labels, weights)?;
            let n1 = (d + 1) as usize;
            let n2 = (2 * d + 1) as usize;
            let mut mat = SparseMatrix::zeros(u12.dim(), c0.dim());
            for l in 0..rank {
                for j in 0..n1 {
                    // x^j on U1 restricts to x^j on the overlap (offset d)
                    mat.add_entry(l * n2 + j + d as usize, l * n1 + j, -Scalar::one());
                }
                for j in 0..n2 {
                    mat.add_entry(l * n2 + j, rank * n1 + l * n2 + j, Scalar::one());
                }
            }
            let f = BoundedMap::new(c0.clone(), u12.clone(), mat)?;
            Complex::new(0, vec![c0, u12], vec![f])
        }
    }
}

/// Coordinates of the rank-1 two-cover 0-cochain `(f₁, f₂)`.
pub fn two_cover_cochain(f1: &TateSeries, f2: &LaurentWindow, deg_cap: usize) -> Result<SparseVec> {
    let d = deg_cap as i64;
    let mut v = SparseVec::new();
    for (a, c) in f1.terms() {
        let j = a.get(0) as usize;
        if j as i64 > d {
            return Err(Error::Dimension("section exceeds the cap".into()));
        }
        v.insert(j, c.clone());
    }
    for (&j, c) in f2.terms() {
        if j.abs() > d {
            return Err(Error::Dimension("section exceeds the window".into()));
        }
        v.insert((d + 1 + j + d) as usize, c.clone());
    }
    Ok(v)
}

/// Coordinates of a rank-1 overlap 1-cochain.
pub fn two_cover_overlap(h: &LaurentWindow, deg_cap: usize) -> SparseVec {
    let d = deg_cap as i64;
    h.terms().map(|(&j, c)| ((j + d) as usize, c.clone())).collect()
}

/// A 0-cochain `(f₁, f₂)` whose coboundary is `h`, from the Laurent splitting
/// `h = f - g`: take `f₁ = -f`, `f₂ = -g`.
pub fn two_cover_split(h: &LaurentWindow) -> (TateSeries, LaurentWindow) {
    let (f, g) = laurent_split(h);
    let neg = LaurentWindow::zero(h.window(), h.radius_exp());
    (-&f, neg.sub(&g))
}

/// Difference `f₂ - f₁` of a 0-cochain on the overlap; zero exactly when the pair glues.
pub fn gluing_defect(f1: &TateSeries, f2: &LaurentWindow) -> Result<LaurentWindow> {
    let inner = LaurentWindow::from_series(f1, f2.window(), f2.radius_exp())?;
    Ok(f2.sub(&inner))
}

/// Rank of the glued sections in a rank-1 two-cover complex together with the
/// series they glue to.
pub fn glued_sections(c: &Complex, deg_cap: usize) -> Result<Vec<TateSeries>> {
    let ker = kernel_basis(c.map(0));
    let n1 = deg_cap + 1;
    Ok(ker
        .vectors()
        .map(|(_, v)| {
            TateSeries::from_terms(
                1,
                deg_cap,
                v.iter()
                    .filter(|(&i, _)| i < n1)
                    .map(|(&i, x)| (MultiIndex::from_slice(&[i as u32]), x.clone())),
            )
        })
        .collect())
}

/// Machine-readable summary of a diagnostic run.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub op: String,
    pub caps: Vec<usize>,
    pub profile: Vec<LogNorm>,
    pub verdict: Verdict,
    pub certificate: Vec<LogNorm>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
}

impl Report {
    pub fn new(op: impl Into<String>, verdict: Verdict) -> Self {
        Report {
            op: op.into(),
            caps: Vec::new(),
            profile: Vec::new(),
            verdict,
            certificate: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("report details serialize"),
        );
        self
    }
}
