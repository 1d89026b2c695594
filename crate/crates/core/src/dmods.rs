//! Free modules with flat connection, right modules on `Ω ⊗ M`, and level
//! presentations of coadmissible towers.
//!
//! Sections of a rank-`r` module are column vectors of series; the connection acts
//! by `∇_i v = ∂_i v + Θ_i v`. Flatness is checked modulo terms of degree `≥ D`,
//! the range a derivative of a cap-`D` series leaves exact.

use std::fmt;

use num_traits::One;
use serde_json::Value;

use crate::diffop::DiffOp;
use crate::error::{Error, Result};
use crate::homalg::SheafSpec;
use crate::padic::{LogNorm, Prime, Scalar};
use crate::tate::{series_mul, MultiIndex, TateSeries};
use crate::text::default_var_names;

/// Square-or-rectangular matrix of series, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<TateSeries>,
}

impl SeriesMatrix {
    pub fn zero(rows: usize, cols: usize, nvars: usize, deg_cap: usize) -> Self {
        SeriesMatrix {
            rows,
            cols,
            entries: vec![TateSeries::zero(nvars, deg_cap); rows * cols],
        }
    }

    pub fn identity(r: usize, nvars: usize, deg_cap: usize) -> Self {
        let mut m = Self::zero(r, r, nvars, deg_cap);
        for i in 0..r {
            m.set(i, i, TateSeries::one(nvars, deg_cap));
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, entries: Vec<TateSeries>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(SeriesMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn diagonal(entries: Vec<TateSeries>) -> Self {
        let r = entries.len();
        let (m, d) = (entries[0].nvars(), entries[0].deg_cap());
        let mut out = Self::zero(r, r, m, d);
        for (i, e) in entries.into_iter().enumerate() {
            out.set(i, i, e);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &TateSeries {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, f: TateSeries) {
        self.entries[i * self.cols + j] = f;
    }

    pub fn entries(&self) -> &[TateSeries] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(TateSeries::is_zero)
    }

    fn map(&self, f: impl Fn(&TateSeries) -> TateSeries) -> Self {
        SeriesMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|e| -e)
    }

    pub fn derive(&self, i: usize) -> Self {
        self.map(|e| e.derive(i))
    }

    pub fn truncate(&self, deg: usize) -> Self {
        self.map(|e| e.truncate(deg))
    }

    pub fn with_cap(&self, deg_cap: usize) -> Self {
        self.map(|e| e.with_cap(deg_cap))
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        SeriesMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn add(&self, other: &SeriesMatrix) -> Result<Self> {
        self.same_shape(other)?;
        Ok(SeriesMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.try_add(b))
                .collect::<Result<_>>()?,
        })
    }

    pub fn sub(&self, other: &SeriesMatrix) -> Result<Self> {
        self.add(&other.neg())
    }

    fn same_shape(&self, other: &SeriesMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &SeriesMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension("inner matrix dimensions differ".into()));
        }
        let (m, d) = self.shape_params(other);
        let mut out = Self::zero(self.rows, other.cols, m, d);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = TateSeries::zero(m, d);
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.try_add(&series_mul(a, b)?)?;
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    fn shape_params(&self, other: &SeriesMatrix) -> (usize, usize) {
        let a = &self.entries[0];
        let b = &other.entries[0];
        (a.nvars(), a.deg_cap().min(b.deg_cap()))
    }

    /// `v ↦ A v` on a column vector.
    pub fn apply(&self, v: &[TateSeries]) -> Result<Vec<TateSeries>> {
        if v.len() != self.cols {
            return Err(Error::Dimension("vector length differs from column count".into()));
        }
        (0..self.rows)
            .map(|i| {
                let mut acc = TateSeries::zero(v[0].nvars(), v[0].deg_cap().min(self.entries[0].deg_cap()));
                for (k, x) in v.iter().enumerate() {
                    let a = self.get(i, k);
                    if !a.is_zero() && !x.is_zero() {
                        acc = acc.try_add(&series_mul(a, x)?)?;
                    }
                }
                Ok(acc)
            })
            .collect()
    }

    /// `A ⊗ B` with the index of `e_i ⊗ f_k` equal to `i·rows(B) + k`.
    pub fn kron(&self, other: &SeriesMatrix) -> Result<Self> {
        let (m, d) = self.shape_params(other);
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zero(rows, cols, m, d);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        let b = other.get(k, l);
                        if !b.is_zero() {
                            out.set(i * other.rows + k, j * other.cols + l, series_mul(a, b)?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Free module `O^r` on the `m`-polydisk with connection `∇_i = ∂_i + Θ_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionModule {
    nvars: usize,
    rank: usize,
    deg_cap: usize,
    theta: Vec<SeriesMatrix>,
}

impl ConnectionModule {
    /// Rejects non-flat data.
    pub fn new(nvars: usize, rank: usize, deg_cap: usize, theta: Vec<SeriesMatrix>) -> Result<Self> {
        if theta.len() != nvars {
            return Err(Error::Dimension(format!(
                "{} connection matrices on a {nvars}-dimensional polydisk",
                theta.len()
            )));
        }
        for t in &theta {
            if t.rows() != rank || t.cols() != rank {
                return Err(Error::Dimension(format!("connection matrices must be {rank}x{rank}")));
            }
            if let Some(e) = t.entries().iter().find(|e| e.nvars() != nvars) {
                return Err(Error::VariableMismatch {
                    left: e.nvars(),
                    right: nvars,
                });
            }
        }
        let theta = theta.into_iter().map(|t| t.with_cap(deg_cap)).collect();
        let m = ConnectionModule {
            nvars,
            rank,
            deg_cap,
            theta,
        };
        if let Some((i, j)) = m.curvature_defect()? {
            return Err(Error::NotFlat { i, j });
        }
        Ok(m)
    }

    pub fn trivial(nvars: usize, rank: usize, deg_cap: usize) -> Self {
        ConnectionModule {
            nvars,
            rank,
            deg_cap,
            theta: vec![SeriesMatrix::zero(rank, rank, nvars, deg_cap); nvars],
        }
    }

    /// `(O, d + Σ a_i dx_i)`.
    pub fn rank1(forms: Vec<TateSeries>) -> Result<Self> {
        let nvars = forms.len();
        let deg_cap = forms.iter().map(TateSeries::deg_cap).min().unwrap_or(0);
        let theta = forms.into_iter().map(|f| SeriesMatrix::diagonal(vec![f])).collect();
        Self::new(nvars, 1, deg_cap, theta)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn deg_cap(&self) -> usize {
        self.deg_cap
    }

    pub fn theta(&self) -> &[SeriesMatrix] {
        &self.theta
    }

    pub fn as_sheaf(&self) -> SheafSpec {
        SheafSpec::Free { rank: self.rank }
    }

    /// The same connection data under another degree cap.
    pub fn with_deg_cap(&self, deg_cap: usize) -> Result<Self> {
        Self::new(self.nvars, self.rank, deg_cap, self.theta.clone())
    }

    /// First pair `i < j` with `∂_iΘ_j − ∂_jΘ_i + [Θ_i, Θ_j] ≠ 0` below degree `D`.
    pub fn curvature_defect(&self) -> Result<Option<(usize, usize)>> {
        let keep = self.deg_cap.saturating_sub(1);
        for i in 0..self.nvars {
            for j in i + 1..self.nvars {
                let (ti, tj) = (&self.theta[i], &self.theta[j]);
                let curv = tj
                    .derive(i)
                    .sub(&ti.derive(j))?
                    .add(&ti.mul(tj)?)?
                    .sub(&tj.mul(ti)?)?;
                if !curv.truncate(keep).is_zero() {
                    return Ok(Some((i, j)));
                }
            }
        }
        Ok(None)
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.curvature_defect(), Ok(None))
    }

    /// `∇_i v = ∂_i v + Θ_i v`.
    pub fn nabla(&self, i: usize, v: &[TateSeries]) -> Result<Vec<TateSeries>> {
        let tv = self.theta[i].apply(v)?;
        v.iter().zip(tv).map(|(x, t)| x.derive(i).try_add(&t)).collect()
    }

    /// Parses `{"rank": r, "vars": m, "theta": [[entries of Θ_1], …]}` with each
    /// `Θ_i` given as `r·r` row-major series strings.
    pub fn from_json(v: &Value, deg_cap: usize) -> Result<Self> {
        let rank = json_usize(v, "rank")?;
        let nvars = match v.get("vars") {
            Some(Value::Array(a)) => a.len(),
            Some(_) => json_usize(v, "vars")?,
            None => 1,
        };
        let names = match v.get("vars") {
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| x.as_str().map(str::to_string).ok_or_else(|| Error::Parse("variable names must be strings".into())))
                .collect::<Result<Vec<_>>>()?,
            _ => default_var_names(nvars),
        };
        let theta = match v.get("theta") {
            None => vec![SeriesMatrix::zero(rank, rank, nvars, deg_cap); nvars],
            Some(Value::Array(per_var)) => {
                if per_var.len() != nvars {
                    return Err(Error::Parse(format!(
                        "theta lists {} matrices for {nvars} variables",
                        per_var.len()
                    )));
                }
                per_var
                    .iter()
                    .map(|m| {
                        let items = m
                            .as_array()
                            .ok_or_else(|| Error::Parse("each theta entry must be an array".into()))?;
                        let entries = items
                            .iter()
                            .map(|s| {
                                let s = s
                                    .as_str()
                                    .ok_or_else(|| Error::Parse("series entries must be strings".into()))?;
                                TateSeries::parse_body(s, &names, deg_cap)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        SeriesMatrix::from_rows(rank, rank, entries)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            Some(_) => return Err(Error::Parse("theta must be an array".into())),
        };
        Self::new(nvars, rank, deg_cap, theta)
    }
}

pub(crate) fn json_usize(v: &Value, key: &str) -> Result<usize> {
    v.get(key)
        .and_then(Value::as_u64)
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("missing or non-integer field {key:?}")))
}

/// A right module on `Ω ⊗ M`, stored by the matrices `R_i` of
/// `v · ∂_i = -∂_i v + R_i v`; functions act by multiplication.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RightModule {
    nvars: usize,
    rank: usize,
    deg_cap: usize,
    action: Vec<SeriesMatrix>,
    twisted: bool,
}

impl RightModule {
    pub fn new(nvars: usize, rank: usize, deg_cap: usize, action: Vec<SeriesMatrix>, twisted: bool) -> Self {
        RightModule {
            nvars,
            rank,
            deg_cap,
            action,
            twisted,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn action(&self) -> &[SeriesMatrix] {
        &self.action
    }

    pub fn is_twisted(&self) -> bool {
        self.twisted
    }

    /// `v · ∂_i`.
    pub fn act_derivation(&self, i: usize, v: &[TateSeries]) -> Result<Vec<TateSeries>> {
        let rv = self.action[i].apply(v)?;
        v.iter().zip(rv).map(|(x, r)| r.try_add(&-&x.derive(i))).collect()
    }

    /// `v · P` for `P = Σ f_α ∂^α`, i.e. `Σ ((v f_α) · ∂^α)`.
    pub fn act(&self, v: &[TateSeries], p: &DiffOp) -> Result<Vec<TateSeries>> {
        if p.nvars() != self.nvars {
            return Err(Error::VariableMismatch {
                left: p.nvars(),
                right: self.nvars,
            });
        }
        let cap = v.first().map_or(self.deg_cap, TateSeries::deg_cap);
        let mut out = vec![TateSeries::zero(self.nvars, cap); v.len()];
        for (alpha, f) in p.terms() {
            let mut w: Vec<TateSeries> = v.iter().map(|x| series_mul(x, f)).collect::<Result<_>>()?;
            for i in 0..self.nvars {
                for _ in 0..alpha.get(i) {
                    w = self.act_derivation(i, &w)?;
                }
            }
            for (o, x) in out.iter_mut().zip(w) {
                *o = o.try_add(&x)?;
            }
        }
        Ok(out)
    }
}

/// `Ω ⊗ M`: `(ω ⊗ m)·∂ = (ω·∂) ⊗ m − ω ⊗ ∇_∂ m` with `ω·∂ = −Lie_∂ ω`, so `R_i = −Θ_i`.
pub fn side_change(m: &ConnectionModule) -> RightModule {
    RightModule {
        nvars: m.nvars,
        rank: m.rank,
        deg_cap: m.deg_cap,
        action: m.theta.iter().map(SeriesMatrix::neg).collect(),
        twisted: true,
    }
}

/// Inverse of [`side_change`]; only defined on `Ω`-twisted modules.
pub fn side_change_inv(n: &RightModule) -> Result<ConnectionModule> {
    if !n.twisted {
        return Err(Error::Invalid("right module carries no Ω twist to undo".into()));
    }
    ConnectionModule::new(
        n.nvars,
        n.rank,
        n.deg_cap,
        n.action.iter().map(SeriesMatrix::neg).collect(),
    )
}

/// `M ⊗_O N` with `Θ_i ⊗ I + I ⊗ Θ'_i`.
pub fn tensor_o(m: &ConnectionModule, n: &ConnectionModule) -> Result<ConnectionModule> {
    if m.nvars != n.nvars {
        return Err(Error::VariableMismatch {
            left: m.nvars,
            right: n.nvars,
        });
    }
    let cap = m.deg_cap.min(n.deg_cap);
    let im = SeriesMatrix::identity(m.rank, m.nvars, cap);
    let in_ = SeriesMatrix::identity(n.rank, n.nvars, cap);
    let theta = m
        .theta
        .iter()
        .zip(&n.theta)
        .map(|(a, b)| a.kron(&in_)?.add(&im.kron(b)?))
        .collect::<Result<Vec<_>>>()?;
    ConnectionModule::new(m.nvars, m.rank * n.rank, cap, theta)
}

/// `Hom_O(M, O)` with the dual connection `−Θᵀ`.
pub fn o_dual(m: &ConnectionModule) -> ConnectionModule {
    ConnectionModule {
        nvars: m.nvars,
        rank: m.rank,
        deg_cap: m.deg_cap,
        theta: m.theta.iter().map(|t| t.transpose().neg()).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PresentationKind {
    Connection,
    Cyclic,
}

/// `D_n^{gens} / (rows)`: each relation row lists one operator per generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPresentation {
    level: u32,
    ngens: usize,
    relations: Vec<Vec<DiffOp>>,
    kind: PresentationKind,
}

impl LevelPresentation {
    pub fn new(level: u32, ngens: usize, relations: Vec<Vec<DiffOp>>, kind: PresentationKind) -> Result<Self> {
        if relations.iter().any(|r| r.len() != ngens) {
            return Err(Error::Dimension(format!("relation rows must have {ngens} entries")));
        }
        Ok(LevelPresentation {
            level,
            ngens,
            relations,
            kind,
        })
    }

    /// Relations `∂_i e_l − Σ_k (Θ_i)_{kl} e_k` for every `i` and `l`.
    pub fn from_connection(m: &ConnectionModule, level: u32, op_cap: usize) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, t) in m.theta.iter().enumerate() {
            for l in 0..m.rank {
                let row = (0..m.rank)
                    .map(|k| {
                        let mut e = DiffOp::from_series(&-t.get(k, l), op_cap);
                        if k == l {
                            e = e.try_add(&DiffOp::derivation(m.nvars, i, m.deg_cap, op_cap))?;
                        }
                        Ok(e)
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
        }
        Self::new(level, m.rank, rows, PresentationKind::Connection)
    }

    pub fn cyclic(p: DiffOp, level: u32) -> Self {
        LevelPresentation {
            level,
            ngens: 1,
            relations: vec![vec![p]],
            kind: PresentationKind::Cyclic,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn ngens(&self) -> usize {
        self.ngens
    }

    pub fn kind(&self) -> &PresentationKind {
        &self.kind
    }

    pub fn relations(&self) -> &[Vec<DiffOp>] {
        &self.relations
    }

    pub fn relations_mut(&mut self) -> &mut Vec<Vec<DiffOp>> {
        &mut self.relations
    }

    /// Largest level-`n` norm of a relation entry; the relations lie in the
    /// `p^{-s}`-scaled unit ball of `D_n` for this `s`.
    pub fn relation_norm(&self, p: Prime) -> LogNorm {
        self.relations
            .iter()
            .flatten()
            .map(|e| e.op_level_norm(p, self.level))
            .max()
            .unwrap_or(LogNorm::NegInf)
    }

    /// Rows scaled so that the top-order term of the first nonzero entry has a
    /// constant coefficient 1 where possible, then sorted.
    pub fn normal_form(&self) -> Vec<Vec<String>> {
        let names = default_var_names(self.relations.iter().flatten().next().map_or(1, DiffOp::nvars));
        let mut rows: Vec<Vec<String>> = self
            .relations
            .iter()
            .filter(|r| r.iter().any(|e| !e.is_zero()))
            .map(|r| {
                let lead = r.iter().find(|e| !e.is_zero()).expect("nonzero row");
                let top = lead
                    .terms()
                    .max_by_key(|(a, _)| (a.total(), (*a).clone()))
                    .map(|(_, f)| f.clone())
                    .expect("nonzero entry");
                let scale = if top.degree() == Some(0) {
                    top.constant_term().recip()
                } else {
                    Scalar::one()
                };
                r.iter().map(|e| e.scale(&scale).display_with(&names)).collect()
            })
            .collect();
        rows.sort();
        rows
    }
}

impl fmt::Display for LevelPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "level {}: ", self.level)?;
        let rows: Vec<String> = self.normal_form().into_iter().map(|r| format!("[{}]", r.join(", "))).collect();
        write!(f, "{}", rows.join("; "))
    }
}

/// `A_{n-1} ⊗_{A_n} M_n`: the same relations read at level `n − 1`.
pub fn base_change_level(p: &LevelPresentation) -> Result<LevelPresentation> {
    if p.level == 0 {
        return Err(Error::LevelTooLow(0));
    }
    Ok(LevelPresentation {
        level: p.level - 1,
        ..p.clone()
    })
}

/// The constant tower `M_{top}, …, M_0` of a presentation.
pub fn tower_from(p: &LevelPresentation) -> Result<Vec<LevelPresentation>> {
    let mut out = vec![p.clone()];
    while out.last().expect("nonempty").level > 0 {
        out.push(base_change_level(out.last().expect("nonempty"))?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct TowerVerdict {
    pub verdict: crate::homalg::Verdict,
    pub levels: Vec<u32>,
    /// index in the tower of the first stage that is not the base change of its predecessor
    pub failed_stage: Option<usize>,
}

/// Checks `M_{n-1} ≅ A_{n-1} ⊗_{A_n} M_n` along a tower listed from the top level down.
pub fn coadmissibility_check(tower: &[LevelPresentation]) -> Result<TowerVerdict> {
    if tower.len() < 2 {
        return Err(Error::Invalid(format!(
            "a tower needs at least two stages, got {}",
            tower.len()
        )));
    }
    let levels = tower.iter().map(|t| t.level).collect();
    for k in 1..tower.len() {
        let expected = base_change_level(&tower[k - 1])?;
        let actual = &tower[k];
        if expected.level != actual.level
            || expected.ngens != actual.ngens
            || expected.normal_form() != actual.normal_form()
        {
            return Ok(TowerVerdict {
                verdict: crate::homalg::Verdict::Fail,
                levels,
                failed_stage: Some(k),
            });
        }
    }
    Ok(TowerVerdict {
        verdict: crate::homalg::Verdict::Pass,
        levels,
        failed_stage: None,
    })
}

/// Remainder of `q` modulo the left ideal `D·p` in one variable, for `p` with
/// constant leading coefficient.
pub fn reduce_cyclic(q: &DiffOp, p: &DiffOp) -> Result<DiffOp> {
    if p.nvars() != 1 || q.nvars() != 1 {
        return Err(Error::Unsupported("cyclic reduction is univariate".into()));
    }
    let k = p.order().ok_or_else(|| Error::Invalid("division by the zero operator".into()))?;
    let lead = p.coeff(&MultiIndex::from_slice(&[k as u32]));
    if lead.degree() != Some(0) {
        return Err(Error::Unsupported("leading coefficient must be a nonzero constant".into()));
    }
    let p = p.scale(&lead.constant_term().recip());
    let mut r = q.clone();
    while let Some(j) = r.order() {
        if j < k {
            break;
        }
        let f = r.coeff(&MultiIndex::from_slice(&[j as u32]));
        let s = DiffOp::monomial(MultiIndex::from_slice(&[(j - k) as u32]), f, r.op_cap());
        r = r.try_add(&-&s.op_mul(&p)?)?;
    }
    Ok(r)
}

/// A module input: a free connection module or a cyclic `D_n/D_n·P`.
#[derive(Clone, Debug)]
pub enum ModuleSpec {
    Connection(ConnectionModule),
    Cyclic { op: DiffOp, level: u32 },
}

impl ModuleSpec {
    pub fn from_json(v: &Value, deg_cap: usize, op_cap: usize) -> Result<Self> {
        if let Some(text) = v.get("cyclic") {
            let text = text
                .as_str()
                .ok_or_else(|| Error::Parse("\"cyclic\" must be an operator string".into()))?;
            let level = v.get("level").and_then(Value::as_u64).unwrap_or(0) as u32;
            let op = DiffOp::parse(text, &default_var_names(1), deg_cap, op_cap)?;
            return Ok(ModuleSpec::Cyclic { op, level });
        }
        Ok(ModuleSpec::Connection(ConnectionModule::from_json(v, deg_cap)?))
    }

    pub fn connection(&self) -> Result<&ConnectionModule> {
        match self {
            ModuleSpec::Connection(m) => Ok(m),
            ModuleSpec::Cyclic { .. } => Err(Error::Unsupported("a connection module is required".into())),
        }
    }
}

/// `D/D·(∂ − a)` for the rank-one module `(O, d + a dx)`.
pub fn cyclic_of_rank1(m: &ConnectionModule, op_cap: usize) -> Result<DiffOp> {
    if m.rank != 1 || m.nvars != 1 {
        return Err(Error::Unsupported("cyclic form needs a rank-one module on the disk".into()));
    }
    let a = m.theta[0].get(0, 0);
    DiffOp::derivation(1, 0, m.deg_cap, op_cap).try_add(&DiffOp::from_series(&-a, op_cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::scalar_from_i64;

    fn s(text: &str, m: usize, cap: usize) -> TateSeries {
        TateSeries::parse_body(text, &default_var_names(m), cap).unwrap()
    }

    fn op(text: &str, cap: usize, op_cap: usize) -> DiffOp {
        DiffOp::parse(text, &default_var_names(1), cap, op_cap).unwrap()
    }

    #[test]
    fn rank1_tensor_adds_forms() {
        let a = ConnectionModule::rank1(vec![s("x^2 + 3", 1, 12)]).unwrap();
        let b = ConnectionModule::rank1(vec![s("1/5*x", 1, 12)]).unwrap();
        let t = tensor_o(&a, &b).unwrap();
        assert_eq!(t.theta[0].get(0, 0), &s("x^2 + 1/5*x + 3", 1, 12));
        let o = ConnectionModule::trivial(1, 1, 12);
        assert_eq!(tensor_o(&o, &a).unwrap(), a);
        let two = ConnectionModule::trivial(2, 1, 12);
        assert!(tensor_o(&two, &a).is_err());
    }

    #[test]
    fn non_flat_rejected() {
        // Θ_x = y, Θ_y = 0: curvature -1 ≠ 0
        let tx = SeriesMatrix::diagonal(vec![s("y", 2, 8)]);
        let ty = SeriesMatrix::diagonal(vec![s("0", 2, 8)]);
        assert_eq!(
            ConnectionModule::new(2, 1, 8, vec![tx, ty]).unwrap_err(),
            Error::NotFlat { i: 0, j: 1 }
        );
        let m = ConnectionModule::rank1(vec![s("y", 2, 8), s("x", 2, 8)]).unwrap();
        assert!(m.is_flat());
    }

    #[test]
    fn side_change_examples() {
        let o = ConnectionModule::trivial(1, 1, 10);
        let n = side_change(&o);
        let f = s("x^3 + 2*x", 1, 10);
        let d = op("d", 10, 4);
        assert_eq!(n.act(std::slice::from_ref(&f), &d).unwrap(), vec![-&f.derive(0)]);
        assert_eq!(n.act(&[TateSeries::one(1, 10)], &d).unwrap()[0], TateSeries::zero(1, 10));
        assert_eq!(side_change_inv(&n).unwrap(), o);
        let untwisted = RightModule::new(1, 1, 10, vec![SeriesMatrix::zero(1, 1, 1, 10)], false);
        assert!(side_change_inv(&untwisted).is_err());
    }

    #[test]
    fn right_action_associative() {
        let m = ConnectionModule::rank1(vec![s("x + 5", 1, 20)]).unwrap();
        let n = side_change(&m);
        let p = op("(x^2)*d + 3", 20, 6);
        let q = op("d^2 + (x)*d", 20, 6);
        let v = vec![s("x^4 - 2*x + 1", 1, 20)];
        let lhs = n.act(&n.act(&v, &p).unwrap(), &q).unwrap();
        let rhs = n.act(&v, &p.op_mul(&q).unwrap()).unwrap();
        // three derivatives in total leave degrees ≤ 17 exact
        assert_eq!(lhs[0].truncate(17), rhs[0].truncate(17));
    }

    #[test]
    fn duals() {
        let a = ConnectionModule::rank1(vec![s("x + 2", 1, 8)]).unwrap();
        assert_eq!(o_dual(&a).theta[0].get(0, 0), &s("-x - 2", 1, 8));
        assert_eq!(o_dual(&o_dual(&a)), a);
        let o = ConnectionModule::trivial(1, 1, 8);
        assert_eq!(o_dual(&o), o);
    }

    #[test]
    fn json_roundtrip() {
        let v: Value = serde_json::from_str(r#"{"rank": 2, "vars": 1, "theta": [["x", "1", "0", "5"]]}"#).unwrap();
        let m = ConnectionModule::from_json(&v, 10).unwrap();
        assert_eq!(m.rank(), 2);
        assert_eq!(m.theta[0].get(0, 1), &TateSeries::one(1, 10));
        let v: Value = serde_json::from_str(r#"{"cyclic": "d + 1", "level": 3}"#).unwrap();
        assert!(matches!(ModuleSpec::from_json(&v, 10, 4).unwrap(), ModuleSpec::Cyclic { level: 3, .. }));
        let bad: Value = serde_json::from_str(r#"{"rank": 1, "theta": [["x", "y"]]}"#).unwrap();
        assert!(ConnectionModule::from_json(&bad, 10).is_err());
    }

    #[test]
    fn towers() {
        let m = ConnectionModule::rank1(vec![s("1/5 + x", 1, 16)]).unwrap();
        let top = LevelPresentation::from_connection(&m, 4, 8).unwrap();
        let tower = tower_from(&top).unwrap();
        assert_eq!(tower.len(), 5);
        assert_eq!(coadmissibility_check(&tower).unwrap().verdict, crate::homalg::Verdict::Pass);
        let mut bad = tower.clone();
        bad[2].relations_mut()[0][0] = op("d + 2", 16, 8);
        let v = coadmissibility_check(&bad).unwrap();
        assert_eq!(v.verdict, crate::homalg::Verdict::Fail);
        assert_eq!(v.failed_stage, Some(2));
        assert!(coadmissibility_check(&tower[..1]).is_err());
        assert_eq!(base_change_level(&tower[4]).unwrap_err(), Error::LevelTooLow(0));
    }

    #[test]
    fn normal_form_makes_rows_monic() {
        let a = LevelPresentation::cyclic(op("2*d + 2", 8, 4), 1);
        let b = LevelPresentation::cyclic(op("d + 1", 8, 4), 1);
        assert_eq!(a.normal_form(), b.normal_form());
    }

    #[test]
    fn cyclic_reduction() {
        // ∂^2 ≡ a' + a^2 modulo D(∂ − a) for constant a = 3: 9
        let p = op("d - 3", 10, 6);
        let r = reduce_cyclic(&op("d^2", 10, 6), &p).unwrap();
        assert_eq!(r, DiffOp::from_series(&TateSeries::constant(1, 10, scalar_from_i64(9)), 6));
        let p = op("d - x", 10, 6);
        let r = reduce_cyclic(&op("d^2", 10, 6), &p).unwrap();
        assert_eq!(r, DiffOp::from_series(&s("1 + x^2", 1, 10), 6));
    }
}
