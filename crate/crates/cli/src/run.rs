//! Executes a validated [`Scenario`] and assembles its [`RunReport`].

use std::time::Instant;

use dcap_core::diffop::{commutator_preimage, commutator_with_coordinate, exactness_counts, spencer_complex, DiffOp};
use dcap_core::dmods::{
    coadmissibility_check, o_dual, side_change, side_change_inv, tensor_o, tower_from, ConnectionModule,
    LevelPresentation, ModuleSpec,
};
use dcap_core::functors::{
    closed_pushforward, derham_complex, derham_pushforward_point, dual_rank1, kashiwara_restrict, kashiwara_roundtrip,
    pullback_composition_check, FiberModule, RestrictInput,
};
use dcap_core::homalg::{
    cech_complex, cohomology_object, glued_sections, prenuclear_check, roos_preimage, strictness_report,
    two_cover_cochain, two_cover_overlap, two_cover_split, BoundedBall, Covering, InverseSystem, PrenuclearSample,
    Report, SheafSpec, Verdict, WitnessSchedule,
};
use dcap_core::linalg::SparseVec;
use dcap_core::padic::{format_scalar, parse_scalar};
use dcap_core::sample::{seed_from_env, Sampler};
use dcap_core::tate::LaurentWindow;
use dcap_core::{LogNorm, Scalar, TateSeries};
use num_traits::One;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{CliError, CliResult};
use crate::scenario::{FieldConfig, Scenario};

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    /// the scenario as read, after command-line overrides
    pub scenario: Value,
    pub field: FieldConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub report: Report,
    pub wall_time_ms: u64,
}

impl RunReport {
    /// Pretty JSON; with `timing == false` the wall time is left out so that runs
    /// compare byte for byte.
    pub fn to_json(&self, timing: bool) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if !timing {
            v.as_object_mut().expect("object").remove("wall_time_ms");
        }
        serde_json::to_string_pretty(&v).expect("reports serialize") + "\n"
    }
}

struct Ctx<'a> {
    s: &'a Scenario,
    seed: Option<u64>,
}

impl Ctx<'_> {
    fn field(&self) -> &FieldConfig {
        &self.s.field
    }

    fn param(&self, key: &str) -> Option<&Value> {
        self.s.params.get(key)
    }

    fn usize_param(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.param(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| CliError::Parse(format!("params.{key} must be a non-negative integer"))),
        }
    }

    fn list_param(&self, key: &str, default: &[usize]) -> CliResult<Vec<usize>> {
        match self.param(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| x.as_u64().map(|x| x as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CliError::Parse(format!("params.{key} must be a list of integers"))),
            Some(_) => Err(CliError::Parse(format!("params.{key} must be a list of integers"))),
        }
    }

    fn sampler(&mut self, salt: u64) -> CliResult<Sampler> {
        let seed = match self.param("seed") {
            None => seed_from_env(),
            Some(v) => v.as_u64().ok_or_else(|| CliError::Parse("params.seed must be an integer".into()))?,
        };
        self.seed = Some(seed);
        Ok(Sampler::new(seed ^ salt, self.field().prime()?))
    }

    fn module_spec(&self, v: &Value) -> CliResult<ModuleSpec> {
        ModuleSpec::from_json(v, self.field().deg_cap, self.field().op_cap).map_err(|e| CliError::Parse(format!("module: {e}")))
    }

    fn connection_from(&self, v: &Value) -> CliResult<ConnectionModule> {
        match self.module_spec(v)? {
            ModuleSpec::Connection(m) => Ok(m),
            ModuleSpec::Cyclic { .. } => Err(CliError::Parse(format!("{} needs a connection module", self.s.op.name))),
        }
    }

    /// The scenario module, or `O` on the disk when none is given.
    fn connection(&self) -> CliResult<ConnectionModule> {
        match &self.s.module {
            Some(v) => self.connection_from(v),
            None => Ok(ConnectionModule::trivial(1, 1, self.field().deg_cap)),
        }
    }
}

pub fn run_scenario(s: &Scenario) -> CliResult<RunReport> {
    let start = Instant::now();
    let mut ctx = Ctx { s, seed: None };
    let report = match s.op.name {
        "derham" => derham(&ctx)?,
        "strictness" => strictness(&ctx)?,
        "limit_cokernel" => limit_cokernel(&ctx)?,
        "cech_disk" => cech_disk(&ctx)?,
        "kashiwara" => kashiwara(&ctx)?,
        "i_plus" => i_plus(&ctx)?,
        "i_nat" => i_nat(&ctx)?,
        "f_shriek" => f_shriek(&ctx)?,
        "division" => division(&mut ctx)?,
        "spencer" => spencer(&ctx)?,
        "side_change" => side_changing(&mut ctx)?,
        "dual" => dual(&mut ctx)?,
        "tensor" => tensor(&mut ctx)?,
        "roos" => roos(&mut ctx)?,
        "prenuclear" => prenuclear(&ctx)?,
        "coadmissible" => coadmissible(&ctx)?,
        other => unreachable!("operation {other} passed validation"),
    };
    Ok(RunReport {
        scenario: s.source.clone(),
        field: s.field.clone(),
        seed: ctx.seed,
        report,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

fn derham(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let m = c.connection()?;
    let r = derham_pushforward_point(&m, &f.ladder, f.prime()?)?;
    let top = r.degree(0).expect("degree 0 is always reported");
    let mut rep = Report::new("derham", top.strictness.verdict)
        .detail("lowest_degree", -(r.nvars as i64))
        .detail("lowest_kernel_raw", &r.lowest_kernel_raw)
        .detail("lowest_kernel_bounded", &r.lowest_kernel_bounded)
        .detail("degrees", &r.degrees)
        .detail("cokernel_flags", &r.cokernel_flags);
    rep.caps = r.caps.clone();
    rep.profile = top.strictness.profile.clone();
    Ok(rep)
}

fn strictness(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let m = c.connection()?;
    let caps = c.list_param("caps", &f.ladder)?;
    let prime = f.prime()?;
    let ladder = caps
        .iter()
        .map(|&cap| Ok((cap, derham_complex(&m, cap, prime)?.complex.incoming(0)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let r = strictness_report(&ladder);
    let mut rep = Report::new("strictness", r.verdict);
    rep.caps = r.caps;
    rep.profile = r.profile;
    Ok(rep)
}

fn limit_cokernel(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let m = c.connection()?;
    let r = derham_pushforward_point(&m, &f.ladder, f.prime()?)?;
    let mut flags = Map::new();
    let mut all_found = true;
    match c.param("forms") {
        None => {
            for fl in &r.cokernel_flags {
                flags.insert(format!("{}: {}", fl.degree, fl.form), fl.vanishes.into());
            }
        }
        Some(Value::Array(forms)) => {
            for form in forms {
                let (degree, label) = match form {
                    Value::String(s) => (0, s.clone()),
                    Value::Object(o) => (
                        o.get("degree").and_then(Value::as_i64).unwrap_or(0),
                        o.get("form").and_then(Value::as_str).unwrap_or_default().to_string(),
                    ),
                    _ => return Err(CliError::Parse("params.forms entries must be labels or {degree, form}".into())),
                };
                let v = r.flag(degree, &label);
                all_found &= v.is_some();
                flags.insert(format!("{degree}: {label}"), v.map_or(Value::Null, Value::from));
            }
        }
        Some(_) => return Err(CliError::Parse("params.forms must be a list".into())),
    }
    let mut rep = Report::new("limit_cokernel", Verdict::from_pass(all_found)).detail("vanishes", flags);
    rep.caps = r.caps.clone();
    Ok(rep)
}

fn cech_disk(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let d = f.deg_cap;
    let cover = match c.param("covering") {
        None => Covering::DiskTwoCover,
        Some(v) => Covering::parse(v.as_str().ok_or_else(|| CliError::Parse("params.covering must be a string".into()))?)?,
    };
    let rank = c.usize_param("sheaf_rank", 1)?;
    let sheaf = if rank == 1 { SheafSpec::Structure } else { SheafSpec::Free { rank } };
    let cx = cech_complex(cover, sheaf, d, f.prime()?)?;
    let h1 = cohomology_object(&cx, 1, true)?;
    let h0 = cohomology_object(&cx, 0, true)?;
    let mut rep = Report::new("cech_disk", Verdict::Pass)
        .detail("covering", cover.id())
        .detail("dims", cx.dims())
        .detail("h0_dim", h0.classical_dim())
        .detail("h1_dim", h1.classical_dim());
    let mut ok = h1.classical_dim() == 0;
    if cover == Covering::DiskTwoCover && rank == 1 {
        let glued = glued_sections(&cx, d)?;
        let splits = (-(d as i64)..=d as i64).all(|j| {
            let h = LaurentWindow::from_terms(d as i64, 1, [(j, Scalar::one())]).expect("inside the window");
            let (f1, f2) = two_cover_split(&h);
            two_cover_cochain(&f1, &f2, d).is_ok_and(|v| cx.map(0).apply(&v) == two_cover_overlap(&h, d))
        });
        ok &= splits && glued.len() == d + 1;
        rep = rep.detail("glued_sections", glued.len()).detail("overlap_splits", splits);
    }
    rep.verdict = Verdict::from_pass(ok);
    rep.caps = vec![d];
    Ok(rep)
}

fn kashiwara(c: &Ctx) -> CliResult<Report> {
    let prime = c.field().prime()?;
    let dims = c.list_param("fiber_dims", &[0, 1, 2, 3])?;
    let caps = c.list_param("d_caps", &[8, 16, 32])?;
    let mut runs = Vec::new();
    let mut ok = true;
    for &cap in &caps {
        for &dim in &dims {
            let r = kashiwara_roundtrip(FiberModule { dim }, cap, prime)?;
            ok &= r.verdict == Verdict::Pass;
            runs.push(r);
        }
    }
    let mut rep = Report::new("kashiwara", Verdict::from_pass(ok)).detail("roundtrips", runs);
    rep.caps = caps;
    Ok(rep)
}

fn i_plus(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let dim = c.usize_param("fiber_dim", 1)?;
    let cap = c.usize_param("d_cap", f.op_cap)?;
    let n = closed_pushforward(FiberModule { dim }, cap, f.prime()?);
    let profiles: Vec<_> = (0..=cap).map(|j| n.bound_profile(j, f.levels)).collect();
    let mut rep = Report::new("i_plus", Verdict::Pass)
        .detail("fiber_dim", dim)
        .detail("dim", n.dim())
        .detail("bound_profiles", profiles);
    rep.caps = vec![cap];
    Ok(rep)
}

fn i_nat(c: &Ctx) -> CliResult<Report> {
    let m = c.connection()?;
    let r = kashiwara_restrict(RestrictInput::Connection(&m))?;
    let mut rep = Report::new("i_nat", Verdict::Pass)
        .detail("rank", m.rank())
        .detail("fiber_dim", r.fiber.dim)
        .detail("kernel_dim", r.kernel.len());
    rep.caps = vec![m.deg_cap()];
    Ok(rep)
}

fn f_shriek(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let m = c.connection()?;
    let point = match c.param("point") {
        None => Scalar::from_integer(0.into()),
        Some(v) => parse_scalar(v.as_str().ok_or_else(|| CliError::Parse("params.point must be a rational string".into()))?)?,
    };
    let r = pullback_composition_check(&m, &point, &f.ladder, f.prime()?)?;
    let mut rep = Report::new("f_shriek", r.verdict)
        .detail("point", format_scalar(&point))
        .detail("direct", &r.direct)
        .detail("composite", &r.composite)
        .detail("direct_degree", r.direct_degree)
        .detail("composite_degree", r.composite_degree);
    rep.caps = f.ladder.clone();
    Ok(rep)
}

fn division(c: &mut Ctx) -> CliResult<Report> {
    let f = c.field().clone();
    let samples = c.usize_param("samples", 50)?;
    let level = c.usize_param("level", 2)? as u32;
    let mut s = c.sampler(6)?;
    let mut failures = Vec::new();
    let (mut dropped, mut bounds) = (Vec::new(), Vec::new());
    for t in 0..samples {
        let m = 1 + t % 2;
        let k = s.rng().gen_range(0..m);
        let p = s.operator(m, f.deg_cap, f.op_cap);
        let w = commutator_preimage(&p, k, level, f.prime()?)?;
        let back = commutator_with_coordinate(&w.preimage, k)?;
        if back != p.with_caps(f.deg_cap, f.op_cap + 1) || !w.certified() {
            failures.push(t);
        }
        dropped.push(w.dropped_norm);
        bounds.push(w.bound);
    }
    let mut rep = Report::new("division", Verdict::from_pass(failures.is_empty()))
        .detail("samples", samples)
        .detail("level", level)
        .detail("failures", failures);
    rep.caps = vec![f.deg_cap, f.op_cap];
    rep.profile = dropped;
    rep.certificate = bounds;
    Ok(rep)
}

fn spencer(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let m = c.usize_param("nvars", 1)?;
    let level = c.usize_param("level", 1)? as u32;
    let cx = spencer_complex(m, level, f.deg_cap, f.op_cap, f.prime()?)?;
    let counts = exactness_counts(&cx);
    let ok = cx.composition_is_zero() && counts.iter().all(|e| e.exact());
    let mut rep = Report::new("spencer", Verdict::from_pass(ok))
        .detail("nvars", m)
        .detail("dims", cx.dims())
        .detail("composition_is_zero", cx.composition_is_zero())
        .detail("exactness", counts);
    rep.caps = vec![f.deg_cap, f.op_cap];
    Ok(rep)
}

/// The scenario module alone, or `samples` sampled rank-one modules.
fn modules(c: &mut Ctx, salt: u64) -> CliResult<Vec<ConnectionModule>> {
    if c.s.module.is_some() {
        return Ok(vec![c.connection()?]);
    }
    let n = c.usize_param("samples", 20)?;
    let cap = c.field().deg_cap;
    let mut s = c.sampler(salt)?;
    Ok((0..n).map(|_| s.rank1_module(cap)).collect::<dcap_core::Result<Vec<_>>>()?)
}

fn theta_text(m: &ConnectionModule) -> Vec<Vec<String>> {
    m.theta()
        .iter()
        .map(|t| t.entries().iter().map(TateSeries::to_string).collect())
        .collect()
}

fn side_changing(c: &mut Ctx) -> CliResult<Report> {
    let ms = modules(c, 8)?;
    let mut failures = Vec::new();
    for (i, m) in ms.iter().enumerate() {
        if side_change_inv(&side_change(m))? != *m {
            failures.push(i);
        }
    }
    let mut rep = Report::new("side_change", Verdict::from_pass(failures.is_empty()))
        .detail("modules", ms.len())
        .detail("failures", failures);
    rep.caps = vec![c.field().deg_cap];
    Ok(rep)
}

fn dual(c: &mut Ctx) -> CliResult<Report> {
    let f = c.field().clone();
    let level = c.usize_param("level", 2)? as u32;
    let ms = modules(c, 8)?;
    let mut failures = Vec::new();
    let mut norms = Vec::new();
    let mut duals = Vec::new();
    for (i, m) in ms.iter().enumerate() {
        let roundtrip = side_change_inv(&side_change(m))? == *m;
        let d = dual_rank1(m, level, f.op_cap, f.prime()?)?;
        if !(roundtrip && d.biduality == Verdict::Pass && d.matches_o_dual && d.first.dual == o_dual(m)) {
            failures.push(i);
        }
        norms.push(d.relation_norm);
        duals.push(json!({
            "module": theta_text(m),
            "dual": theta_text(&d.first.dual),
            "injective": d.first.injective,
            "cokernel_dim": d.first.cokernel_dim,
        }));
    }
    let mut rep = Report::new("dual", Verdict::from_pass(failures.is_empty()))
        .detail("level", level)
        .detail("failures", failures)
        .detail("duals", duals);
    rep.caps = vec![f.deg_cap, f.op_cap];
    rep.profile = norms;
    Ok(rep)
}

/// Curvature of `Θ` entrywise with plain series arithmetic below degree `D`.
fn flat(m: &ConnectionModule) -> bool {
    let r = m.rank();
    let th = m.theta();
    (0..m.nvars()).all(|i| {
        (i + 1..m.nvars()).all(|j| {
            (0..r).all(|a| {
                (0..r).all(|b| {
                    let mut k = &th[j].get(a, b).derive(i) - &th[i].get(a, b).derive(j);
                    for l in 0..r {
                        k = &k + &(th[i].get(a, l) * th[j].get(l, b));
                        k = &k - &(th[j].get(a, l) * th[i].get(l, b));
                    }
                    k.truncate(m.deg_cap() - 1).is_zero()
                })
            })
        })
    })
}

fn tensor(c: &mut Ctx) -> CliResult<Report> {
    let cap = c.field().deg_cap;
    if let Some(right) = c.param("right").cloned() {
        let a = c.connection()?;
        let b = c.connection_from(&right)?;
        let t = tensor_o(&a, &b)?;
        let mut rep = Report::new("tensor", Verdict::from_pass(flat(&t)))
            .detail("rank", t.rank())
            .detail("theta", theta_text(&t));
        rep.caps = vec![cap];
        return Ok(rep);
    }
    let n = c.usize_param("samples", 20)?;
    let mut s = c.sampler(9)?;
    let mut failures = Vec::new();
    for i in 0..n {
        let a = s.rank1_module(cap)?;
        let b = s.rank1_module(cap)?;
        let t = tensor_o(&a, &b)?;
        let adds = *t.theta()[0].get(0, 0) == a.theta()[0].get(0, 0) + b.theta()[0].get(0, 0);
        let m = s.flat_rank2(cap)?;
        let k = s.flat_rank2(cap)?;
        let t = tensor_o(&m, &k)?;
        if !(adds && t.rank() == 4 && flat(&m) && flat(&t)) {
            failures.push(i);
        }
    }
    let mut rep = Report::new("tensor", Verdict::from_pass(failures.is_empty()))
        .detail("pairs", 2 * n)
        .detail("failures", failures);
    rep.caps = vec![cap];
    Ok(rep)
}

fn schedule(dim: usize, lowered: usize) -> WitnessSchedule {
    let base = WitnessSchedule::DegreeHead { dim };
    if lowered == 0 {
        base
    } else {
        WitnessSchedule::Lowered(Box::new(base), lowered as i64)
    }
}

fn roos(c: &mut Ctx) -> CliResult<Report> {
    let prime = c.field().prime()?;
    let stages = c.usize_param("stages", 6)?;
    let dim = c.usize_param("dim", 33)?;
    let samples = c.usize_param("samples", 5)?;
    let tower = InverseSystem::kx_tower(prime, stages, dim, Some(schedule(dim, 0)))?;
    let ball = BoundedBall { radii: vec![0; stages] };
    let mut s = c.sampler(10)?;
    let mut ok = true;
    let mut runs = Vec::new();
    let mut last = None;
    for _ in 0..samples {
        // |v_n| ≤ 1 in V_n: the x^j coefficient has valuation at least n·j
        let mut target = vec![SparseVec::new(); stages];
        for (n, v) in target.iter_mut().enumerate() {
            for j in 0..dim {
                if s.rng().gen_bool(0.4) {
                    v.insert(j, s.scalar((n * j) as i64, (n * j) as i64 + 1));
                }
            }
        }
        let out = roos_preimage(&tower, &target, &ball)?;
        let exact = tower.roos_map(&out.preimage)? == target;
        ok &= exact && out.dominated();
        runs.push(json!({ "exact": exact, "dominated": out.dominated() }));
        last = Some(out);
    }
    let grid: Vec<PrenuclearSample> = (0..stages.saturating_sub(1))
        .flat_map(|n| (-2..=2).flat_map(move |r| (-4..=0).map(move |e| PrenuclearSample { stage: n, radius: r, tolerance: e })))
        .collect();
    let pre = prenuclear_check(&tower, &grid)?;
    ok &= pre.verdict == Verdict::Pass;
    let mut rep = Report::new("roos", Verdict::from_pass(ok))
        .detail("stages", stages)
        .detail("dim", dim)
        .detail("runs", runs)
        .detail("prenuclear", &pre);
    if let Some(out) = last {
        rep.profile = out.actual.clone();
        rep.certificate = out.certificate.clone();
        rep = rep.detail("witness_radii", &out.witness_radii).detail("correction_norms", &out.correction_norms);
    }
    rep.caps = vec![dim];
    Ok(rep)
}

fn prenuclear(c: &Ctx) -> CliResult<Report> {
    let prime = c.field().prime()?;
    let stages = c.usize_param("stages", 6)?;
    let dim = c.usize_param("dim", 33)?;
    let lowered = c.usize_param("lowered", 0)?;
    let tower = InverseSystem::kx_tower(prime, stages, dim, Some(schedule(dim, lowered)))?;
    let samples: Vec<PrenuclearSample> = match c.param("samples") {
        None => (0..stages.saturating_sub(1))
            .flat_map(|n| (-2..=2).flat_map(move |r| (-4..=0).map(move |e| PrenuclearSample { stage: n, radius: r, tolerance: e })))
            .collect(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| {
                let t = x.as_array().filter(|t| t.len() == 3);
                let t = t.ok_or_else(|| CliError::Parse("params.samples entries must be [stage, radius, tolerance]".into()))?;
                let stage = t[0].as_u64().ok_or_else(|| CliError::Parse("sample stage must be a non-negative integer".into()))?;
                let int = |v: &Value| v.as_i64().ok_or_else(|| CliError::Parse("sample radius and tolerance must be integers".into()));
                Ok(PrenuclearSample { stage: stage as usize, radius: int(&t[1])?, tolerance: int(&t[2])? })
            })
            .collect::<CliResult<Vec<_>>>()?,
        Some(_) => return Err(CliError::Parse("params.samples must be a list".into())),
    };
    let r = prenuclear_check(&tower, &samples)?;
    let mut rep = Report::new("prenuclear", r.verdict)
        .detail("checked", r.checked)
        .detail("lowered", lowered)
        .detail("counterexample", &r.counterexample);
    if let Some(ce) = &r.counterexample {
        rep.certificate = vec![LogNorm::Finite(ce.declared)];
        rep.profile = vec![ce.needed];
    }
    rep.caps = vec![dim];
    Ok(rep)
}

fn coadmissible(c: &Ctx) -> CliResult<Report> {
    let f = c.field();
    let top = match &c.s.module {
        Some(v) => match c.module_spec(v)? {
            ModuleSpec::Connection(m) => LevelPresentation::from_connection(&m, f.levels, f.op_cap)?,
            ModuleSpec::Cyclic { op, level } => LevelPresentation::cyclic(op, if level == 0 { f.levels } else { level }),
        },
        None => LevelPresentation::from_connection(&ConnectionModule::trivial(1, 1, f.deg_cap), f.levels, f.op_cap)?,
    };
    let mut tower = tower_from(&top)?;
    if let Some(stage) = c.param("perturb_stage") {
        let k = stage.as_u64().map(|k| k as usize).filter(|&k| k < tower.len());
        let k = k.ok_or_else(|| CliError::Parse(format!("params.perturb_stage must be below {}", tower.len())))?;
        let rel = &tower[k].relations()[0][0];
        let extra = DiffOp::from_series(&TateSeries::constant(rel.nvars(), f.deg_cap, f.prime()?.as_scalar()), rel.op_cap());
        tower[k].relations_mut()[0][0] = rel.try_add(&extra)?;
    }
    let r = coadmissibility_check(&tower)?;
    let mut rep = Report::new("coadmissible", r.verdict)
        .detail("levels", &r.levels)
        .detail("failed_stage", r.failed_stage)
        .detail("top", tower[0].to_string());
    rep.caps = vec![f.deg_cap, f.op_cap];
    Ok(rep)
}
