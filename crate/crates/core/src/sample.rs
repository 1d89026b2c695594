//! Seeded random inputs for property checks. The seed comes from `DCAP_SEED`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffop::DiffOp;
use crate::dmods::{ConnectionModule, SeriesMatrix};
use crate::error::Result;
use crate::padic::{Prime, Scalar};
use crate::tate::{MultiIndex, TateSeries};

pub const SEED_VAR: &str = "DCAP_SEED";
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Seed from `DCAP_SEED`, falling back to a fixed default.
pub fn seed_from_env() -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

pub struct Sampler {
    rng: ChaCha8Rng,
    prime: Prime,
}

impl Sampler {
    pub fn new(seed: u64, prime: Prime) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            prime,
        }
    }

    pub fn from_env(prime: Prime) -> Self {
        Self::new(seed_from_env(), prime)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// `u·p^k` with a small integer unit part `u` and `k ∈ [lo, hi]`.
    pub fn scalar(&mut self, lo: i64, hi: i64) -> Scalar {
        let p = self.prime.get() as i64;
        let mut u: i64 = self.rng.gen_range(1..p * 3);
        if u % p == 0 {
            u += 1;
        }
        if self.rng.gen_bool(0.5) {
            u = -u;
        }
        let k = self.rng.gen_range(lo..=hi);
        Scalar::from_integer(u.into()) * self.prime.pow(k)
    }

    /// Sparse polynomial in `nvars` variables with integral coefficients.
    pub fn polynomial(&mut self, nvars: usize, max_deg: usize, deg_cap: usize) -> TateSeries {
        let mut f = TateSeries::zero(nvars, deg_cap);
        let terms = self.rng.gen_range(1..=4);
        for _ in 0..terms {
            let e: Vec<u32> = (0..nvars).map(|_| self.rng.gen_range(0..=max_deg as u32)).collect();
            if e.iter().sum::<u32>() as usize > max_deg.min(deg_cap) {
                continue;
            }
            let c = self.scalar(0, 1);
            f.add_term(MultiIndex::from_slice(&e), c);
        }
        f
    }

    /// Operator of order `< op_cap` with integral polynomial coefficients.
    pub fn operator(&mut self, nvars: usize, deg_cap: usize, op_cap: usize) -> DiffOp {
        let mut p = DiffOp::zero(nvars, deg_cap, op_cap);
        let terms = self.rng.gen_range(1..=5);
        for _ in 0..terms {
            let alpha: Vec<u32> = (0..nvars)
                .map(|_| self.rng.gen_range(0..op_cap.min(6) as u32))
                .collect();
            if alpha.iter().sum::<u32>() as usize >= op_cap {
                continue;
            }
            let f = self.polynomial(nvars, 3, deg_cap);
            p.add_term(MultiIndex::from_slice(&alpha), f);
        }
        p
    }

    /// `(O, d + a dx)` on the disk with a random polynomial `a`.
    pub fn rank1_module(&mut self, deg_cap: usize) -> Result<ConnectionModule> {
        let a = self.polynomial(1, 3, deg_cap);
        ConnectionModule::rank1(vec![a])
    }

    /// Flat rank-2 module on the 2-disk: the gauge transform of `Θ_i = diag(∂_i φ_1, ∂_i φ_2)`
    /// by `G = I + N` with `N` strictly triangular, so `G^{-1} = I − N`.
    pub fn flat_rank2(&mut self, deg_cap: usize) -> Result<ConnectionModule> {
        let m = 2;
        let phis = [self.polynomial(m, 3, deg_cap), self.polynomial(m, 3, deg_cap)];
        let n_entry = self.polynomial(m, 2, deg_cap);
        let mut nmat = SeriesMatrix::zero(2, 2, m, deg_cap);
        if self.rng.gen_bool(0.5) {
            nmat.set(0, 1, n_entry);
        } else {
            nmat.set(1, 0, n_entry);
        }
        let id = SeriesMatrix::identity(2, m, deg_cap);
        let g = id.add(&nmat)?;
        let ginv = id.sub(&nmat)?;
        let theta = (0..m)
            .map(|i| {
                let d = SeriesMatrix::diagonal(vec![phis[0].derive(i), phis[1].derive(i)]);
                ginv.mul(&d)?.mul(&g)?.add(&ginv.mul(&g.derive(i))?)
            })
            .collect::<Result<Vec<_>>>()?;
        ConnectionModule::new(m, 2, deg_cap, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_runs_repeat() {
        let p = Prime::new(5).unwrap();
        let a: Vec<_> = (0..5).map({
            let mut s = Sampler::new(7, p);
            move |_| s.operator(2, 10, 6)
        }).collect();
        let b: Vec<_> = (0..5).map({
            let mut s = Sampler::new(7, p);
            move |_| s.operator(2, 10, 6)
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn gauge_modules_are_flat() {
        let mut s = Sampler::new(3, Prime::new(5).unwrap());
        for _ in 0..5 {
            assert!(s.flat_rank2(12).unwrap().is_flat());
        }
    }
}
