//! Pushforward to a point, Kashiwara's equivalence for a coordinate hyperplane,
//! extraordinary pullbacks, and duality of rank-one modules, all at truncation.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::diffop::{subsets, wedge_insert, DiffOp};
use crate::dmods::{o_dual, side_change_inv, ConnectionModule, RightModule, SeriesMatrix};
use crate::error::{Error, Result};
use crate::homalg::{
    bounded_kernel_dim, cohomology, cohomology_object, kernel_basis, limit_cokernel_class, BoundedMap, Complex,
    LeftHeartObject, StrictnessReport, TruncBanach, Verdict,
};
use crate::linalg::{SparseMatrix, SparseVec};
use crate::padic::{log_norm, LogNorm, Prime, Scalar};
use crate::tate::{MultiIndex, NormFamily, TateSeries};
use crate::text::default_var_names;

fn monomial_label(a: &MultiIndex, vars: &[String]) -> String {
    let parts: Vec<String> = (0..a.nvars())
        .filter(|&i| a.get(i) > 0)
        .map(|i| match a.get(i) {
            1 => vars[i].clone(),
            e => format!("{}^{e}", vars[i]),
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

/// `Ω^k ⊗ M` truncated at a degree cap, with basis `e_l x^α dx_J`.
#[derive(Clone, Debug)]
struct FormSpace {
    wedges: Vec<Vec<usize>>,
    monos: Vec<MultiIndex>,
    pos: BTreeMap<MultiIndex, usize>,
    rank: usize,
}

impl FormSpace {
    fn new(nvars: usize, rank: usize, k: usize, cap: usize) -> Self {
        // highest degree first keeps the triangular differentials free of fill-in
        let mut monos = MultiIndex::all_up_to(nvars, cap);
        monos.reverse();
        let pos = monos.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        FormSpace {
            wedges: subsets(nvars, k),
            monos,
            pos,
            rank,
        }
    }

    fn dim(&self) -> usize {
        self.wedges.len() * self.rank * self.monos.len()
    }

    fn index(&self, w: usize, l: usize, a: &MultiIndex) -> Option<usize> {
        self.pos
            .get(a)
            .map(|&p| (w * self.rank + l) * self.monos.len() + p)
    }

    fn cell(&self, idx: usize) -> (usize, usize, &MultiIndex) {
        let n = self.monos.len();
        let p = idx % n;
        let wl = idx / n;
        (wl / self.rank, wl % self.rank, &self.monos[p])
    }

    fn banach(&self, prime: Prime, vars: &[String]) -> Result<TruncBanach> {
        let labels = (0..self.dim())
            .map(|i| {
                let (w, l, a) = self.cell(i);
                let mut s = String::new();
                if self.rank > 1 {
                    s.push_str(&format!("e{l}*"));
                }
                s.push_str(&monomial_label(a, vars));
                if !self.wedges[w].is_empty() {
                    let d: Vec<String> = self.wedges[w].iter().map(|&j| format!("d{}", vars[j])).collect();
                    s.push(' ');
                    s.push_str(&d.join("^"));
                }
                s
            })
            .collect();
        TruncBanach::new(prime, labels, vec![0; self.dim()])
    }
}

/// The de Rham complex `Ω^• ⊗ M` of a connection module at one cap, in degrees
/// `[-m, 0]`; `Ω^k` is truncated at degree `D - k`.
#[derive(Clone, Debug)]
pub struct DerhamComplex {
    pub cap: usize,
    pub complex: Complex,
    spaces: Vec<FormSpace>,
}

impl DerhamComplex {
    /// Total degree of the monomial at a basis index of `Ω^k ⊗ M`.
    pub fn monomial_degree(&self, k: usize, idx: usize) -> usize {
        self.spaces[k].cell(idx).2.total()
    }

    /// Index of `e_l x^α dx_J` in `Ω^{|J|} ⊗ M`.
    pub fn index_of(&self, wedge: &[usize], l: usize, a: &MultiIndex) -> Option<usize> {
        let s = &self.spaces[wedge.len()];
        let w = s.wedges.iter().position(|x| x == wedge)?;
        s.index(w, l, a)
    }
}

pub fn derham_complex(module: &ConnectionModule, cap: usize, prime: Prime) -> Result<DerhamComplex> {
    let nv = module.nvars();
    if cap < nv {
        return Err(Error::Config(format!("cap {cap} is below the dimension {nv}")));
    }
    let m = module.with_deg_cap(cap)?;
    let r = m.rank();
    let vars = default_var_names(nv);
    let spaces: Vec<FormSpace> = (0..=nv).map(|k| FormSpace::new(nv, r, k, cap - k)).collect();
    let banach = spaces
        .iter()
        .map(|s| s.banach(prime, &vars))
        .collect::<Result<Vec<_>>>()?;
    let mut maps = Vec::new();
    for k in 0..nv {
        let (src, tgt) = (&spaces[k], &spaces[k + 1]);
        let keep = cap - k - 1;
        let mut mat = SparseMatrix::zeros(tgt.dim(), src.dim());
        for col in 0..src.dim() {
            let (w, l, a) = src.cell(col);
            let mut v = vec![TateSeries::zero(nv, cap); r];
            v[l] = TateSeries::monomial(nv, cap, a.clone(), Scalar::one());
            for i in 0..nv {
                let Some((sign, w2)) = wedge_insert(i, &src.wedges[w]) else {
                    continue;
                };
                let w2 = tgt.wedges.iter().position(|x| *x == w2).expect("wedge in range");
                for (l2, comp) in m.nabla(i, &v)?.into_iter().enumerate() {
                    for (b, c) in comp.terms() {
                        if b.total() <= keep {
                            let row = tgt.index(w2, l2, b).expect("monomial in range");
                            mat.add_entry(row, col, c * Scalar::from_integer(sign.into()));
                        }
                    }
                }
            }
        }
        maps.push(BoundedMap::new(banach[k].clone(), banach[k + 1].clone(), mat)?);
    }
    let complex = Complex::new(-(nv as i64), banach, maps)?;
    Ok(DerhamComplex {
        cap,
        complex,
        spaces,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeReport {
    pub degree: i64,
    pub kernel_dims: Vec<usize>,
    pub coimage_dims: Vec<usize>,
    pub classical_dims: Vec<usize>,
    pub strictness: StrictnessReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CokernelFlag {
    pub degree: i64,
    pub form: String,
    pub vanishes: bool,
}

/// `p_+ M` computed as the cohomology of `Ω^• ⊗ M` along a ladder of caps.
#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    pub nvars: usize,
    pub rank: usize,
    pub caps: Vec<usize>,
    pub degrees: Vec<DegreeReport>,
    /// `dim ker ∇` in the lowest degree at each cap
    pub lowest_kernel_raw: Vec<usize>,
    /// solutions whose normalized tails vanish mod `p`, i.e. those that stay bounded
    /// as the cap grows
    pub lowest_kernel_bounded: Vec<usize>,
    pub cokernel_flags: Vec<CokernelFlag>,
    #[serde(skip)]
    pub complexes: Vec<DerhamComplex>,
    #[serde(skip)]
    pub objects: Vec<Vec<LeftHeartObject>>,
}

impl PushforwardReport {
    pub fn degree(&self, j: i64) -> Option<&DegreeReport> {
        self.degrees.iter().find(|d| d.degree == j)
    }

    pub fn flag(&self, degree: i64, form: &str) -> Option<bool> {
        self.cokernel_flags
            .iter()
            .find(|f| f.degree == degree && f.form == form)
            .map(|f| f.vanishes)
    }
}

/// Highest power `j` of the `x_1^j` test forms checked in the top degree.
pub const TEST_FORMS: u32 = 10;

pub fn derham_pushforward_point(module: &ConnectionModule, caps: &[usize], prime: Prime) -> Result<PushforwardReport> {
    let nv = module.nvars();
    if nv == 0 || nv > 2 {
        return Err(Error::Unsupported(format!("de Rham pushforward on a {nv}-dimensional polydisk")));
    }
    if caps.is_empty() {
        return Err(Error::Config("empty ladder".into()));
    }
    let complexes = caps
        .iter()
        .map(|&c| derham_complex(module, c, prime))
        .collect::<Result<Vec<_>>>()?;
    let ladder: Vec<(usize, Complex)> = complexes.iter().map(|d| (d.cap, d.complex.clone())).collect();
    let lowest = -(nv as i64);
    let mut degrees = Vec::new();
    let mut objects = Vec::new();
    for j in lowest..=0 {
        let (objs, strictness) = cohomology(&ladder, j)?;
        degrees.push(DegreeReport {
            degree: j,
            kernel_dims: objs.iter().map(LeftHeartObject::kernel_dim).collect(),
            coimage_dims: objs.iter().map(|o| o.coimage.dim()).collect(),
            classical_dims: objs.iter().map(LeftHeartObject::classical_dim).collect(),
            strictness,
        });
        objects.push(objs);
    }
    let lowest_kernel_raw = degrees[0].kernel_dims.clone();
    let lowest_kernel_bounded = complexes
        .iter()
        .map(|d| {
            let ker = kernel_basis(d.complex.map(0));
            bounded_kernel_dim(&ker, |i| 2 * d.monomial_degree(0, i) > d.cap)
        })
        .collect();

    let mut cokernel_flags = Vec::new();
    let top: Vec<usize> = (0..nv).collect();
    let top_cap = (caps.iter().min().expect("nonempty") - nv) as u32;
    for j in 0..=TEST_FORMS.min(top_cap) {
        let a = MultiIndex::unit(nv, 0);
        let a = MultiIndex::from_slice(&a.exps().iter().map(|e| e * j).collect::<Vec<_>>());
        let stages = complexes
            .iter()
            .map(|d| {
                let idx = d
                    .index_of(&top, 0, &a)
                    .ok_or_else(|| Error::Config(format!("cap {} too small for the test forms", d.cap)))?;
                let mut v = SparseVec::new();
                v.insert(idx, Scalar::one());
                Ok((d.complex.incoming(0)?, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let form = complexes[0].complex.space(nv).label(stages[0].1.keys().next().copied().expect("unit")).to_string();
        cokernel_flags.push(CokernelFlag {
            degree: 0,
            form,
            vanishes: limit_cokernel_class(&stages),
        });
    }
    let constant = MultiIndex::zero(nv);
    let stages = complexes
        .iter()
        .map(|d| {
            let mut v = SparseVec::new();
            v.insert(d.index_of(&[], 0, &constant).expect("constant term"), Scalar::one());
            Ok((d.complex.incoming(lowest)?, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let idx = complexes[0].index_of(&[], 0, &constant).expect("constant term");
    cokernel_flags.push(CokernelFlag {
        degree: lowest,
        form: complexes[0].complex.space(0).label(idx).to_string(),
        vanishes: limit_cokernel_class(&stages),
    });

    Ok(PushforwardReport {
        nvars: nv,
        rank: module.rank(),
        caps: caps.to_vec(),
        degrees,
        lowest_kernel_raw,
        lowest_kernel_bounded,
        cokernel_flags,
        complexes,
        objects,
    })
}

/// A finite-dimensional `K`-vector space, a module on the point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FiberModule {
    pub dim: usize,
}

/// `M ⊗ K{∂}` truncated at `∂`-degree `c`, basis `e_l ⊗ ∂^j` at index `l(c+1) + j`.
#[derive(Clone, Debug)]
pub struct KashiwaraModule {
    fiber: FiberModule,
    d_cap: usize,
    carrier: TruncBanach,
}

impl KashiwaraModule {
    pub fn fiber(&self) -> FiberModule {
        self.fiber
    }

    pub fn d_cap(&self) -> usize {
        self.d_cap
    }

    pub fn carrier(&self) -> &TruncBanach {
        &self.carrier
    }

    pub fn dim(&self) -> usize {
        self.carrier.dim()
    }

    pub fn index(&self, l: usize, j: usize) -> usize {
        l * (self.d_cap + 1) + j
    }

    /// `y·(m ⊗ ∂^j) = −j m ⊗ ∂^{j−1}`.
    pub fn y_matrix(&self) -> SparseMatrix {
        let mut a = SparseMatrix::zeros(self.dim(), self.dim());
        for l in 0..self.fiber.dim {
            for j in 1..=self.d_cap {
                a.add_entry(self.index(l, j - 1), self.index(l, j), Scalar::from_integer((-(j as i64)).into()));
            }
        }
        a
    }

    /// `∂·(m ⊗ ∂^j) = m ⊗ ∂^{j+1}`, dropping the top degree.
    pub fn d_matrix(&self) -> SparseMatrix {
        let mut a = SparseMatrix::zeros(self.dim(), self.dim());
        for l in 0..self.fiber.dim {
            for j in 0..self.d_cap {
                a.add_entry(self.index(l, j + 1), self.index(l, j), Scalar::one());
            }
        }
        a
    }

    pub fn act_y(&self, v: &SparseVec) -> SparseVec {
        self.y_matrix().apply(v)
    }

    pub fn act_d(&self, v: &SparseVec) -> SparseVec {
        self.d_matrix().apply(v)
    }

    /// Level norms `|m ⊗ ∂^j|_n = p^{nj}` for `n = 0..=n_max`.
    pub fn bound_profile(&self, j: usize, n_max: u32) -> NormFamily {
        NormFamily((0..=n_max).map(|n| LogNorm::Finite(n as i64 * j as i64)).collect())
    }
}

pub fn closed_pushforward(m: FiberModule, d_cap: usize, prime: Prime) -> KashiwaraModule {
    let mut labels = Vec::new();
    for l in 0..m.dim {
        for j in 0..=d_cap {
            labels.push(match j {
                0 => format!("e{l}(x)1"),
                1 => format!("e{l}(x)d"),
                _ => format!("e{l}(x)d^{j}"),
            });
        }
    }
    let n = labels.len();
    KashiwaraModule {
        fiber: m,
        d_cap,
        carrier: TruncBanach::new(prime, labels, vec![0; n]).expect("labels match weights"),
    }
}

pub enum RestrictInput<'a> {
    Pushforward(&'a KashiwaraModule),
    /// restriction to the hyperplane `x_m = 0` of a connection module
    Connection(&'a ConnectionModule),
}

#[derive(Clone, Debug)]
pub struct Restriction {
    pub fiber: FiberModule,
    pub kernel: Vec<SparseVec>,
}

/// `ker(y: N → N)` at truncation.
pub fn kashiwara_restrict(n: RestrictInput<'_>) -> Result<Restriction> {
    let kernel = match n {
        RestrictInput::Pushforward(k) => k.y_matrix().kernel(),
        RestrictInput::Connection(m) => {
            let nv = m.nvars();
            if nv == 0 {
                return Err(Error::Unsupported("restriction from the point".into()));
            }
            let cap = m.deg_cap();
            let src = MultiIndex::all_up_to(nv, cap);
            let tgt = MultiIndex::all_up_to(nv, cap + 1);
            let pos: BTreeMap<&MultiIndex, usize> = tgt.iter().enumerate().map(|(i, a)| (a, i)).collect();
            let mut mat = SparseMatrix::zeros(tgt.len() * m.rank(), src.len() * m.rank());
            let y = MultiIndex::unit(nv, nv - 1);
            for l in 0..m.rank() {
                for (j, a) in src.iter().enumerate() {
                    let row = pos[&a.add(&y)];
                    mat.add_entry(l * tgt.len() + row, l * src.len() + j, Scalar::one());
                }
            }
            mat.kernel()
        }
    };
    Ok(Restriction {
        fiber: FiberModule { dim: kernel.len() },
        kernel,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundtripReport {
    pub verdict: Verdict,
    pub fiber_dim: usize,
    pub d_cap: usize,
    pub kernel_dim: usize,
    /// rank of the canonical map `m ↦ m ⊗ 1` into the kernel
    pub canonical_rank: usize,
}

/// Checks that `m ↦ m ⊗ 1` identifies `M` with `ker y` on `i_+ M`.
pub fn kashiwara_roundtrip(m: FiberModule, d_cap: usize, prime: Prime) -> Result<RoundtripReport> {
    let n = closed_pushforward(m, d_cap, prime);
    let r = kashiwara_restrict(RestrictInput::Pushforward(&n))?;
    let cols: Vec<SparseVec> = (0..m.dim)
        .map(|l| {
            let mut v = SparseVec::new();
            v.insert(n.index(l, 0), Scalar::one());
            v
        })
        .collect();
    let lands_in_kernel = cols.iter().all(|c| n.act_y(c).is_empty());
    let canonical_rank = SparseMatrix::from_columns(n.dim(), cols).rank();
    let ok = lands_in_kernel && canonical_rank == m.dim && r.fiber.dim == m.dim;
    Ok(RoundtripReport {
        verdict: Verdict::from_pass(ok),
        fiber_dim: m.dim,
        d_cap,
        kernel_dim: r.fiber.dim,
        canonical_rank,
    })
}

/// A module with the homological shift it carries.
#[derive(Clone, Debug)]
pub struct ShiftedModule {
    pub module: ConnectionModule,
    pub shift: i64,
}

/// `π^! M` for `π(x, y) = y`: `Θ_x = 0`, `Θ_y = Θ` read in two variables, shift `+1`.
pub fn shriek_pullback_projection(m: &ConnectionModule) -> Result<ShiftedModule> {
    if m.nvars() != 1 {
        return Err(Error::Unsupported("projection pullback starts on the disk".into()));
    }
    let r = m.rank();
    let cap = m.deg_cap();
    let theta_y = SeriesMatrix::from_rows(
        r,
        r,
        m.theta()[0].entries().iter().map(|f| f.reread(2, &[1])).collect(),
    )?;
    let theta_x = SeriesMatrix::zero(r, r, 2, cap);
    Ok(ShiftedModule {
        module: ConnectionModule::new(2, r, cap, vec![theta_x, theta_y])?,
        shift: 1,
    })
}

/// Koszul complex of `(x_1 − c_1, …, x_m − c_m)` on `M`, the `k`-th term truncated at `D + k`.
pub fn koszul_complex(m: &ConnectionModule, point: &[Scalar], cap: usize, prime: Prime) -> Result<Complex> {
    let nv = m.nvars();
    if point.len() != nv {
        return Err(Error::Dimension(format!("point has {} coordinates on a {nv}-disk", point.len())));
    }
    if nv > 2 {
        return Err(Error::Unsupported("Koszul complexes beyond two variables".into()));
    }
    if let Some(c) = point.iter().find(|c| log_norm(c, prime.get()) > LogNorm::Finite(0)) {
        return Err(Error::Invalid(format!("point coordinate {c} lies outside the unit disk")));
    }
    let r = m.rank();
    let vars = default_var_names(nv);
    let spaces: Vec<FormSpace> = (0..=nv).map(|k| FormSpace::new(nv, r, k, cap + k)).collect();
    let banach = spaces
        .iter()
        .map(|s| s.banach(prime, &vars))
        .collect::<Result<Vec<_>>>()?;
    let mut maps = Vec::new();
    for k in 0..nv {
        let (src, tgt) = (&spaces[k], &spaces[k + 1]);
        let mut mat = SparseMatrix::zeros(tgt.dim(), src.dim());
        for col in 0..src.dim() {
            let (w, l, a) = src.cell(col);
            for i in 0..nv {
                let Some((sign, w2)) = wedge_insert(i, &src.wedges[w]) else {
                    continue;
                };
                let w2 = tgt.wedges.iter().position(|x| *x == w2).expect("wedge in range");
                let s = Scalar::from_integer(sign.into());
                let up = a.add(&MultiIndex::unit(nv, i));
                mat.add_entry(tgt.index(w2, l, &up).expect("in range"), col, s.clone());
                if !point[i].is_zero() {
                    mat.add_entry(tgt.index(w2, l, a).expect("in range"), col, -(s * &point[i]));
                }
            }
        }
        maps.push(BoundedMap::new(banach[k].clone(), banach[k + 1].clone(), mat)?);
    }
    Complex::new(0, banach, maps)
}

#[derive(Clone, Debug, Serialize)]
pub struct PointPullback {
    pub nvars: usize,
    pub rank: usize,
    /// `dim X − dim Y` for the point inclusion
    pub shift: i64,
    pub caps: Vec<usize>,
    /// `dims[c][k]`: cohomology dimension in degree `k` at cap `caps[c]`
    pub dims: Vec<Vec<usize>>,
}

impl PointPullback {
    /// Highest degree with nonzero cohomology at the last cap.
    pub fn top_degree(&self) -> Option<i64> {
        self.dims.last()?.iter().rposition(|&d| d > 0).map(|k| k as i64)
    }

    pub fn top_dim(&self) -> usize {
        self.dims.last().and_then(|d| d.iter().rev().find(|&&x| x > 0)).copied().unwrap_or(0)
    }
}

/// `i^! M` for the inclusion of a point, by the Koszul complex.
pub fn shriek_pullback_point(point: &[Scalar], m: &ConnectionModule, caps: &[usize], prime: Prime) -> Result<PointPullback> {
    let dims = caps
        .iter()
        .map(|&cap| {
            let c = koszul_complex(m, point, cap, prime)?;
            (0..c.len())
                .map(|k| Ok(cohomology_object(&c, k as i64, true)?.classical_dim()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointPullback {
        nvars: m.nvars(),
        rank: m.rank(),
        shift: -(m.nvars() as i64),
        caps: caps.to_vec(),
        dims,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionReport {
    pub verdict: Verdict,
    pub direct: PointPullback,
    pub composite: PointPullback,
    /// top cohomological degree, minus the shifts recorded by earlier pullbacks
    pub direct_degree: Option<i64>,
    pub composite_degree: Option<i64>,
}

/// Compares `j^! M` for `j: pt → D¹` at `c` with `i^! π^! M` for `i: pt → D²` at `(0, c)`.
pub fn pullback_composition_check(m: &ConnectionModule, c: &Scalar, caps: &[usize], prime: Prime) -> Result<CompositionReport> {
    let direct = shriek_pullback_point(std::slice::from_ref(c), m, caps, prime)?;
    let lifted = shriek_pullback_projection(m)?;
    let composite = shriek_pullback_point(&[Scalar::zero(), c.clone()], &lifted.module, caps, prime)?;
    let direct_degree = direct.top_degree();
    let composite_degree = composite.top_degree().map(|d| d - lifted.shift);
    let ok = direct.dims.iter().zip(&composite.dims).all(|(a, b)| {
        a.iter().sum::<usize>() == b.iter().sum::<usize>()
    }) && direct.top_dim() == composite.top_dim()
        && direct_degree == composite_degree;
    Ok(CompositionReport {
        verdict: Verdict::from_pass(ok),
        direct,
        composite,
        direct_degree,
        composite_degree,
    })
}

/// Result of one application of [`dual_rank1`].
#[derive(Clone, Debug)]
pub struct DualStep {
    pub dual: ConnectionModule,
    pub right: RightModule,
    /// left multiplication by the relation is injective on truncated `D_n`
    pub injective: bool,
    /// dimension of the truncated cokernel
    pub cokernel_dim: usize,
}

#[derive(Clone, Debug)]
pub struct DualReport {
    pub first: DualStep,
    pub second: DualStep,
    pub level: u32,
    pub relation_norm: LogNorm,
    pub biduality: Verdict,
    pub matches_o_dual: bool,
}

/// `Ext^1(D/D·P, D)` for `P = ∂ − a`, the annihilator of the generator of
/// `(O, d + a dx)`, as the right module `D/P·D`, then side-changed back to a left module.
fn dual_step(m: &ConnectionModule, op_cap: usize) -> Result<DualStep> {
    if m.rank() != 1 || m.nvars() != 1 {
        return Err(Error::Unsupported(format!(
            "duality needs a rank-one module on the disk, got rank {} in {} variables",
            m.rank(),
            m.nvars()
        )));
    }
    if op_cap == 0 {
        return Err(Error::Config("operator cap must be positive".into()));
    }
    let d = m.deg_cap();
    let a = m.theta()[0].get(0, 0).clone();
    let p = crate::dmods::cyclic_of_rank1(m, op_cap)?;
    // descending ∂-order so the pivots land on the terms of order ≥ 1
    let idx = |i: usize, j: usize| (op_cap - j) * (d + 1) + i;
    let tgt_dim = (op_cap + 1) * (d + 1);
    let mut cols = Vec::new();
    for j in 0..op_cap {
        for i in 0..=d {
            let q = DiffOp::monomial(
                MultiIndex::from_slice(&[j as u32]),
                TateSeries::monomial(1, d, MultiIndex::from_slice(&[i as u32]), Scalar::one()),
                op_cap,
            );
            let img = p.op_mul(&q)?;
            let mut v = SparseVec::new();
            for (alpha, f) in img.terms() {
                for (b, c) in f.terms() {
                    v.insert(idx(b.get(0) as usize, alpha.get(0) as usize), c.clone());
                }
            }
            cols.push(v);
        }
    }
    let mut ech = crate::linalg::Echelon::new(false);
    let mut rank = 0;
    for (k, c) in cols.iter().enumerate() {
        if ech.insert(c.clone(), k).is_none() {
            rank += 1;
        }
    }
    let injective = rank == cols.len();
    let mut delta = SparseVec::new();
    delta.insert(idx(0, 1), Scalar::one());
    let (res, _) = ech.reduce(delta);
    if res.keys().any(|&k| k < op_cap * (d + 1)) {
        return Err(Error::Invalid("cokernel representative has positive order".into()));
    }
    let r = TateSeries::from_terms(
        1,
        d,
        res.iter()
            .map(|(&k, c)| (MultiIndex::from_slice(&[(k - op_cap * (d + 1)) as u32]), c.clone())),
    );
    debug_assert_eq!(r, a);
    let right = RightModule::new(1, 1, d, vec![SeriesMatrix::diagonal(vec![r])], true);
    let dual = side_change_inv(&right)?;
    Ok(DualStep {
        dual,
        right,
        injective,
        cokernel_dim: tgt_dim - rank,
    })
}

/// `𝔻M` for `M = (O, d + a dx)` with the biduality and `o_dual` cross-checks.
pub fn dual_rank1(m: &ConnectionModule, level: u32, op_cap: usize, prime: Prime) -> Result<DualReport> {
    let first = dual_step(m, op_cap)?;
    let second = dual_step(&first.dual, op_cap)?;
    let biduality = Verdict::from_pass(second.dual == *m && first.injective && second.injective);
    let matches_o_dual = first.dual == o_dual(m);
    let p = crate::dmods::cyclic_of_rank1(m, op_cap)?;
    Ok(DualReport {
        first,
        second,
        level,
        relation_norm: p.op_level_norm(prime, level),
        biduality,
        matches_o_dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{factorial_valuation, scalar_from_i64};

    fn p5() -> Prime {
        Prime::new(5).unwrap()
    }

    fn rank1(text: &str, cap: usize) -> ConnectionModule {
        ConnectionModule::rank1(vec![TateSeries::parse_body(text, &default_var_names(1), cap).unwrap()]).unwrap()
    }

    #[test]
    fn disk_derham_small_ladder() {
        let r = derham_pushforward_point(&ConnectionModule::trivial(1, 1, 8), &[25, 30, 125], p5()).unwrap();
        assert_eq!(r.lowest_kernel_raw, vec![1, 1, 1]);
        assert_eq!(r.lowest_kernel_bounded, vec![1, 1, 1]);
        let top = r.degree(0).unwrap();
        assert_eq!(top.strictness.profile, vec![LogNorm::Finite(2), LogNorm::Finite(2), LogNorm::Finite(3)]);
        assert_eq!(top.strictness.verdict, Verdict::NonStrict);
        assert_eq!(top.classical_dims, vec![0, 0, 0]);
        assert_eq!(r.flag(0, "x^10 dx"), Some(true));
        assert_eq!(r.flag(-1, "1"), Some(false));
    }

    /// `a_{k+1} = −λ a_k/(k+1)`: bounded iff the tail valuations stay above the head minimum.
    fn recursion_oracle(lambda_val: i64, cap: u64) -> usize {
        let v = |k: u64| lambda_val * k as i64 - factorial_valuation(k, 5) as i64;
        let head = (0..=cap / 2).map(v).min().unwrap();
        let tail = (cap / 2 + 1..=cap).map(v).min().unwrap();
        usize::from(tail >= head)
    }

    #[test]
    fn exponential_kernels() {
        for (text, val) in [("1", 0), ("5", 1)] {
            let m = rank1(text, 8);
            let r = derham_pushforward_point(&m, &[25, 32], p5()).unwrap();
            let oracle: Vec<usize> = [25u64, 32].iter().map(|&c| recursion_oracle(val, c)).collect();
            assert_eq!(r.lowest_kernel_bounded, oracle, "lambda {text}");
        }
    }

    #[test]
    fn two_dimensional_derham() {
        let r = derham_pushforward_point(&ConnectionModule::trivial(2, 1, 6), &[6, 8], p5()).unwrap();
        assert_eq!(r.degree(-2).unwrap().kernel_dims, vec![1, 1]);
        assert_eq!(r.degree(-1).unwrap().classical_dims, vec![0, 0]);
        let m = ConnectionModule::rank1(vec![TateSeries::parse_body("y", &default_var_names(2), 6).unwrap(), TateSeries::parse_body("x", &default_var_names(2), 6).unwrap()]).unwrap();
        let c = derham_complex(&m, 6, p5()).unwrap();
        assert!(c.complex.composition_is_zero());
    }

    #[test]
    fn kashiwara_actions() {
        let n = closed_pushforward(FiberModule { dim: 1 }, 8, p5());
        assert_eq!(n.dim(), 9);
        let mut v = SparseVec::new();
        v.insert(n.index(0, 1), Scalar::one());
        let mut expect = SparseVec::new();
        expect.insert(n.index(0, 0), -Scalar::one());
        assert_eq!(n.act_y(&v), expect);
        for j in [1usize, 4, 8] {
            let mut w = SparseVec::new();
            w.insert(n.index(0, j), Scalar::one());
            for _ in 0..j {
                w = n.act_y(&w);
                assert!(!w.is_empty());
            }
            assert!(n.act_y(&w).is_empty());
        }
        assert!(n.bound_profile(3, 4).is_monotone());
    }

    #[test]
    fn y_action_matches_weyl_relation() {
        // y ∂^j = ∂^j y − j ∂^{j−1}; modulo D·y only the second term survives
        for j in 1..6u32 {
            let y = DiffOp::from_series(&TateSeries::variable(1, 8, 0), 8);
            let dj = DiffOp::monomial(MultiIndex::from_slice(&[j]), TateSeries::one(1, 8), 8);
            let anti = y.op_mul(&dj).unwrap().anti_normal_form();
            let surviving: Vec<_> = anti
                .iter()
                .map(|(a, g)| (a.get(0), g.constant_term()))
                .filter(|(_, c)| !c.is_zero())
                .collect();
            assert_eq!(surviving, vec![(j - 1, scalar_from_i64(-(j as i64)))]);
        }
    }

    #[test]
    fn restriction_and_roundtrip() {
        for dim in 0..4 {
            assert_eq!(kashiwara_roundtrip(FiberModule { dim }, 8, p5()).unwrap().verdict, Verdict::Pass);
        }
        let r = kashiwara_restrict(RestrictInput::Connection(&rank1("x + 1", 10))).unwrap();
        assert_eq!(r.fiber.dim, 0);
        let n = closed_pushforward(FiberModule { dim: 2 }, 5, p5());
        assert_eq!(kashiwara_restrict(RestrictInput::Pushforward(&n)).unwrap().fiber.dim, 2);
    }

    #[test]
    fn projection_pullback() {
        let m = rank1("x^2 + 1", 8);
        let s = shriek_pullback_projection(&m).unwrap();
        assert_eq!(s.shift, 1);
        assert!(s.module.theta()[0].is_zero());
        assert_eq!(s.module.theta()[1].get(0, 0), &TateSeries::parse_body("y^2 + 1", &default_var_names(2), 8).unwrap());
    }

    #[test]
    fn point_pullbacks() {
        let o = ConnectionModule::trivial(1, 1, 8);
        let r = shriek_pullback_point(&[Scalar::zero()], &o, &[4, 8], p5()).unwrap();
        assert_eq!(r.dims, vec![vec![0, 1], vec![0, 1]]);
        let m2 = ConnectionModule::trivial(1, 2, 8);
        let r = shriek_pullback_point(&[scalar_from_i64(3)], &m2, &[6], p5()).unwrap();
        assert_eq!(r.dims, vec![vec![0, 2]]);
        let zero = ConnectionModule::trivial(1, 0, 8);
        let r = shriek_pullback_point(&[Scalar::zero()], &zero, &[4], p5()).unwrap();
        assert_eq!(r.dims, vec![vec![0, 0]]);
        let far = Scalar::new(1.into(), 5.into());
        assert!(shriek_pullback_point(&[far], &o, &[4], p5()).is_err());
        let c = pullback_composition_check(&rank1("x", 6), &scalar_from_i64(2), &[4, 6], p5()).unwrap();
        assert_eq!(c.verdict, Verdict::Pass);
        assert_eq!(c.composite.dims[0], vec![0, 0, 1]);
    }

    #[test]
    fn rank_one_duals() {
        let o = ConnectionModule::trivial(1, 1, 10);
        let r = dual_rank1(&o, 2, 6, p5()).unwrap();
        assert_eq!(r.first.dual, o);
        assert!(r.first.injective);
        assert_eq!(r.first.cokernel_dim, 11);
        let m = rank1("5", 10);
        let r = dual_rank1(&m, 2, 6, p5()).unwrap();
        assert_eq!(r.first.dual, rank1("-5", 10));
        assert_eq!(r.biduality, Verdict::Pass);
        assert!(r.matches_o_dual);
        assert!(dual_rank1(&ConnectionModule::trivial(1, 2, 10), 2, 6, p5()).is_err());
    }
}
