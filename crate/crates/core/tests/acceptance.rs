//! Acceptance suite at the default desk configuration: p = 5, D = 32, D_op = 16,
//! n_max = 4, ladder (32, 64, 128). Each test prints one PASS/FAIL line.

use dcap_core::diffop::{commutator_preimage, commutator_with_coordinate, exactness_counts, spencer_complex};
use dcap_core::dmods::{
    coadmissibility_check, cyclic_of_rank1, o_dual, reduce_cyclic, side_change, side_change_inv, tensor_o,
    tower_from, ConnectionModule, LevelPresentation,
};
use dcap_core::functors::{derham_complex, derham_pushforward_point, dual_rank1, kashiwara_restrict, kashiwara_roundtrip, FiberModule, RestrictInput};
use dcap_core::homalg::{
    cech_complex, cohomology_object, glued_sections, kernel_basis, prenuclear_check, roos_preimage,
    strictness_report, two_cover_cochain, two_cover_overlap, two_cover_split, BoundedBall, Covering,
    InverseSystem, PrenuclearSample, SheafSpec, Verdict, WitnessSchedule,
};
use dcap_core::linalg::SparseVec;
use dcap_core::padic::{factorial_valuation, valuation};
use dcap_core::sample::Sampler;
use dcap_core::tate::LaurentWindow;
use dcap_core::{GlobalField, LogNorm, Scalar, TateSeries};
use num_traits::One;
use rand::Rng;

const LADDER: [usize; 3] = [32, 64, 128];

fn desk() -> GlobalField {
    GlobalField::default_desk()
}

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!("[{}] criterion {n:>2}: {name} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {name}: {detail}");
}

fn sampler(salt: u64) -> Sampler {
    Sampler::new(dcap_core::sample::seed_from_env() ^ salt, desk().prime)
}

#[test]
fn c01_disk_de_rham() {
    let g = desk();
    let r = derham_pushforward_point(&ConnectionModule::trivial(1, 1, g.deg_cap), &LADDER, g.prime).unwrap();
    let ok = r.lowest_kernel_raw == vec![1; 3] && r.lowest_kernel_bounded == vec![1; 3];
    verdict(1, "disk de Rham kernel in the lowest degree", ok, format!("dims {:?}", r.lowest_kernel_bounded));
}

/// Largest `k` with `5^k ≤ d`.
fn floor_log5(d: usize) -> i64 {
    let (mut k, mut q) = (0, 5);
    while q <= d {
        k += 1;
        q *= 5;
    }
    k
}

#[test]
fn c02_non_strictness() {
    let g = desk();
    let one = ConnectionModule::trivial(1, 1, g.deg_cap);
    let caps = [25usize, 125, 625];
    let ladder: Vec<_> = caps
        .iter()
        .map(|&c| (c, derham_complex(&one, c, g.prime).unwrap().complex.map(0).clone()))
        .collect();
    let rep = strictness_report(&ladder);
    let oracle: Vec<LogNorm> = caps.iter().map(|&c| LogNorm::Finite(floor_log5(c))).collect();
    let ok = rep.profile == oracle && rep.verdict == Verdict::NonStrict;
    verdict(2, "preimage profile of d grows like log_5 D", ok, format!("profile {:?} verdict {:?}", rep.profile, rep.verdict));
}

#[test]
fn c03_completed_cokernel() {
    let g = desk();
    let r = derham_pushforward_point(&ConnectionModule::trivial(1, 1, g.deg_cap), &LADDER, g.prime).unwrap();
    let forms_ok = (0..=10).all(|j| {
        let label = if j == 0 { "1 dx".to_string() } else if j == 1 { "x dx".to_string() } else { format!("x^{j} dx") };
        r.flag(0, &label) == Some(true)
    });
    let constant = r.flag(-1, "1");
    let ok = forms_ok && constant == Some(false);
    verdict(3, "limit cokernel classes", ok, format!("x^j dx vanish: {forms_ok}, constant: {constant:?}"));
}

#[test]
fn c04_cech_acyclicity() {
    let g = desk();
    let d = g.deg_cap;
    let c = cech_complex(Covering::DiskTwoCover, SheafSpec::Structure, d, g.prime).unwrap();
    let glued = glued_sections(&c, d).unwrap();
    // each glued section restricts to the same series on both patches
    let agree = kernel_basis(c.map(0)).vectors().all(|(_, v)| {
        (0..=d).all(|j| v.get(&j) == v.get(&(d + 1 + d + j)))
            && (1..=d).all(|j| !v.contains_key(&(d + 1 + d - j)))
    });
    let mut span = dcap_core::linalg::Echelon::new(false);
    for (k, f) in glued.iter().enumerate() {
        span.insert(f.terms().map(|(a, x)| (a.get(0) as usize, x.clone())).collect(), k);
    }
    let h0_ok = glued.len() == d + 1 && span.rank() == d + 1 && agree;
    let split_ok = (-(d as i64)..=d as i64).all(|j| {
        let h = LaurentWindow::from_terms(d as i64, 1, [(j, Scalar::one())]).unwrap();
        let (f1, f2) = two_cover_split(&h);
        let v = two_cover_cochain(&f1, &f2, d).unwrap();
        c.map(0).apply(&v) == two_cover_overlap(&h, d)
    });
    let h1 = cohomology_object(&c, 1, true).unwrap().classical_dim();
    let ok = h0_ok && split_ok && h1 == 0;
    verdict(4, "Cech two-cover of the disk", ok, format!("H0 dim {}, all splits {split_ok}, H1 dim {h1}", glued.len()));
}

#[test]
fn c05_kashiwara() {
    let g = desk();
    let mut ok = true;
    for cap in [8usize, 16, 32] {
        for dim in 0..=3 {
            ok &= kashiwara_roundtrip(FiberModule { dim }, cap, g.prime).unwrap().verdict == Verdict::Pass;
        }
    }
    let mut s = sampler(5);
    let mut restrict_zero = true;
    let mut modules = vec![ConnectionModule::trivial(1, 1, g.deg_cap), ConnectionModule::trivial(1, 3, g.deg_cap)];
    for _ in 0..5 {
        modules.push(s.rank1_module(g.deg_cap).unwrap());
        modules.push(s.flat_rank2(16).unwrap());
    }
    for m in &modules {
        restrict_zero &= kashiwara_restrict(RestrictInput::Connection(m)).unwrap().fiber.dim == 0;
    }
    verdict(5, "Kashiwara roundtrip and restriction", ok && restrict_zero, format!("roundtrips {ok}, restrictions zero {restrict_zero}"));
}

#[test]
fn c06_division_identity() {
    let g = desk();
    let mut s = sampler(6);
    let mut worst = 0usize;
    for t in 0..50 {
        let m = 1 + t % 2;
        let k = s.rng().gen_range(0..m);
        let p = s.operator(m, g.deg_cap, g.op_cap);
        let w = commutator_preimage(&p, k, 2, g.prime).unwrap();
        let back = commutator_with_coordinate(&w.preimage, k).unwrap();
        if back != p.with_caps(g.deg_cap, g.op_cap + 1) || !w.certified() {
            worst += 1;
        }
    }
    verdict(6, "division identity with level drop", worst == 0, format!("{worst} of 50 failed"));
}

#[test]
fn c07_spencer() {
    let g = desk();
    let mut detail = Vec::new();
    let mut ok = true;
    for (m, deg, op) in [(1usize, g.deg_cap, g.op_cap), (2, 8, 8)] {
        let c = spencer_complex(m, 1, deg, op, g.prime).unwrap();
        let counts = exactness_counts(&c);
        let exact = c.composition_is_zero() && counts.iter().all(|e| e.exact());
        ok &= exact;
        detail.push(format!("m={m}: dims {:?}", c.dims()));
    }
    verdict(7, "Spencer exactness", ok, detail.join("; "));
}

#[test]
fn c08_side_change_and_biduality() {
    let g = desk();
    let mut s = sampler(8);
    let mut fails = 0;
    for _ in 0..20 {
        let m = s.rank1_module(g.deg_cap).unwrap();
        let roundtrip = side_change_inv(&side_change(&m)).unwrap() == m;
        let d = dual_rank1(&m, 2, g.op_cap, g.prime).unwrap();
        if !(roundtrip && d.biduality == Verdict::Pass && d.matches_o_dual && d.first.dual == o_dual(&m)) {
            fails += 1;
        }
    }
    verdict(8, "side-changing and rank-one biduality", fails == 0, format!("{fails} of 20 failed"));
}

/// Curvature `∂_iΘ_j − ∂_jΘ_i + [Θ_i, Θ_j]` entrywise with plain series arithmetic,
/// compared below degree `D`.
fn flat_by_oracle(m: &ConnectionModule) -> bool {
    let r = m.rank();
    let keep = m.deg_cap() - 1;
    let th = m.theta();
    (0..m.nvars()).all(|i| {
        (i + 1..m.nvars()).all(|j| {
            (0..r).all(|a| {
                (0..r).all(|b| {
                    let mut c = &th[j].get(a, b).derive(i) - &th[i].get(a, b).derive(j);
                    for k in 0..r {
                        c = &c + &(th[i].get(a, k) * th[j].get(k, b));
                        c = &c - &(th[j].get(a, k) * th[i].get(k, b));
                    }
                    c.truncate(keep).is_zero()
                })
            })
        })
    })
}

#[test]
fn c09_tensor_leibniz() {
    let g = desk();
    let mut s = sampler(9);
    let mut fails = 0;
    for _ in 0..20 {
        let a = s.rank1_module(g.deg_cap).unwrap();
        let b = s.rank1_module(g.deg_cap).unwrap();
        let t = tensor_o(&a, &b).unwrap();
        if *t.theta()[0].get(0, 0) != a.theta()[0].get(0, 0) + b.theta()[0].get(0, 0) {
            fails += 1;
        }
        let m = s.flat_rank2(g.deg_cap).unwrap();
        let n = s.flat_rank2(g.deg_cap).unwrap();
        let t = tensor_o(&m, &n).unwrap();
        if t.rank() != 4 || !flat_by_oracle(&m) || !flat_by_oracle(&t) {
            fails += 1;
        }
    }
    verdict(9, "tensor adds connection forms and stays flat", fails == 0, format!("{fails} failures over 40 pairs"));
}

#[test]
fn c10_mittag_leffler() {
    let g = desk();
    let (stages, dim) = (6usize, 33usize);
    let tower = InverseSystem::kx_tower(g.prime, stages, dim, Some(WitnessSchedule::DegreeHead { dim })).unwrap();
    let mut s = sampler(10);
    let ball = BoundedBall { radii: vec![0; stages] };
    let mut ok = true;
    let mut detail = String::new();
    for _ in 0..5 {
        // |v_n| ≤ 1 in V_n: the x^j coefficient has valuation at least n·j
        let mut target = vec![SparseVec::new(); stages];
        for (n, v) in target.iter_mut().enumerate() {
            for j in 0..dim {
                if s.rng().gen_bool(0.4) {
                    v.insert(j, s.scalar((n * j) as i64, (n * j) as i64 + 1));
                }
            }
        }
        let out = roos_preimage(&tower, &target, &ball).unwrap();
        let exact = tower.roos_map(&out.preimage).unwrap() == target;
        ok &= exact && out.dominated();
        detail = format!("certificate {:?} actual {:?}", out.certificate, out.actual);
    }
    let samples: Vec<PrenuclearSample> = (0..=4)
        .flat_map(|n| (-2..=2).flat_map(move |r| (-4..=0).map(move |e| PrenuclearSample { stage: n, radius: r, tolerance: e })))
        .collect();
    let pass = prenuclear_check(&tower, &samples).unwrap().verdict == Verdict::Pass;
    let bad_schedule = WitnessSchedule::Lowered(Box::new(WitnessSchedule::DegreeHead { dim }), 1);
    let bad = InverseSystem::kx_tower(g.prime, stages, dim, Some(bad_schedule)).unwrap();
    let fail = prenuclear_check(&bad, &[PrenuclearSample { stage: 1, radius: 0, tolerance: -3 }]).unwrap();
    let ok = ok && pass && fail.verdict == Verdict::Fail && fail.counterexample.is_some();
    verdict(10, "constructive Mittag-Leffler on the K{x} tower", ok, format!("{detail}; violation {:?}", fail.counterexample));
}

/// `a_{k+1} = −λ a_k/(k+1)` gives `v(a_k) = k·v(λ) − v(k!)`; the solution survives the
/// cap when its tail valuations never drop below the head minimum.
fn recursion_dim(lambda_val: i64, cap: usize) -> usize {
    let v = |k: usize| lambda_val * k as i64 - factorial_valuation(k as u64, 5) as i64;
    let head = (0..=cap / 2).map(v).min().unwrap();
    let tail = (cap / 2 + 1..=cap).map(v).min().unwrap();
    usize::from(tail >= head)
}

#[test]
fn c11_exponential_dichotomy() {
    let g = desk();
    let mut ok = true;
    let mut detail = Vec::new();
    for lambda in [Scalar::one(), g.uniformizer()] {
        let m = ConnectionModule::rank1(vec![TateSeries::constant(1, g.deg_cap, lambda.clone())]).unwrap();
        let r = derham_pushforward_point(&m, &LADDER, g.prime).unwrap();
        let val = valuation(&lambda, 5).finite().unwrap();
        let oracle: Vec<usize> = LADDER.iter().map(|&c| recursion_dim(val, c)).collect();
        ok &= r.lowest_kernel_bounded == oracle;
        detail.push(format!("lambda={lambda}: {:?} vs oracle {oracle:?}", r.lowest_kernel_bounded));
    }
    verdict(11, "exponential kernel dichotomy", ok, detail.join("; "));
}

#[test]
fn c12_coadmissible_tower() {
    let g = desk();
    let mut s = sampler(12);
    let m = s.flat_rank2(g.deg_cap).unwrap();
    let conn = tower_from(&LevelPresentation::from_connection(&m, g.n_max, g.op_cap).unwrap()).unwrap();
    let a = s.rank1_module(g.deg_cap).unwrap();
    let p = cyclic_of_rank1(&a, g.op_cap).unwrap();
    let cyc = tower_from(&LevelPresentation::cyclic(p.clone(), g.n_max)).unwrap();
    let pass = coadmissibility_check(&conn).unwrap().verdict == Verdict::Pass
        && coadmissibility_check(&cyc).unwrap().verdict == Verdict::Pass;
    let mut bad = conn.clone();
    let extra = dcap_core::diffop::DiffOp::from_series(&TateSeries::constant(2, g.deg_cap, g.uniformizer()), g.op_cap);
    bad[3].relations_mut()[0][0] = bad[3].relations()[0][0].try_add(&extra).unwrap();
    let fail = coadmissibility_check(&bad).unwrap();
    // normal forms of sampled elements agree at consecutive levels
    let mut consistent = true;
    for _ in 0..5 {
        let q = s.operator(1, g.deg_cap, 6);
        let r_top = reduce_cyclic(&q, cyc[0].relations()[0].first().unwrap()).unwrap();
        let r_low = reduce_cyclic(&q, cyc[2].relations()[0].first().unwrap()).unwrap();
        consistent &= r_top == r_low && r_top.order().is_none_or(|o| o < 1);
    }
    let ok = pass && fail.verdict == Verdict::Fail && fail.failed_stage == Some(3) && consistent;
    verdict(12, "coadmissible towers over levels 4 to 0", ok, format!("levels {:?}, perturbed stage {:?}", fail.levels, fail.failed_stage));
}
