//! Seeded random operators: Ginibre mixed states, Haar pure states, GUE directions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BlochVector, DensityOperator, PerturbationOperator};
use crate::error::{Error, Result};
use crate::opspace::{HermitianOperator, Tolerances, C64};

/// Independent sub-seed for stream `stream` of `seed` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws tried by [`Sampler::state`] before giving up on the requested rank.
const MAX_RANK_ATTEMPTS: usize = 100;

#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Standard complex Gaussian, `E|z|² = 1`.
    pub fn complex_gaussian(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        C64::new(self.gaussian() * s, self.gaussian() * s)
    }

    pub fn ginibre(&mut self, rows: usize, cols: usize) -> DMatrix<C64> {
        DMatrix::from_fn(rows, cols, |_, _| self.complex_gaussian())
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn unit_vector(&mut self, d: usize) -> DVector<C64> {
        loop {
            let v = DVector::from_fn(d, |_, _| self.complex_gaussian());
            let n = v.norm();
            if n > 1e-12 {
                return v / C64::new(n, 0.0);
            }
        }
    }

    /// GUE sample `(G + G†)/2`.
    pub fn hermitian(&mut self, d: usize) -> HermitianOperator {
        let g = self.ginibre(d, d);
        HermitianOperator::symmetrized(g)
    }

    /// `GG†/tr(GG†)` with `G` of shape `d × rank`; resampled in the (measure-zero) event that
    /// the numerical rank comes out short.
    pub fn state(&mut self, d: usize, rank: usize, tol: &Tolerances) -> Result<DensityOperator> {
        if rank == 0 || rank > d {
            return Err(Error::InvalidRank { rank, dim: d });
        }
        if d < 2 {
            return Err(Error::DimensionTooSmall { got: d, min: 2 });
        }
        for _ in 0..MAX_RANK_ATTEMPTS {
            let g = self.ginibre(d, rank);
            let gg = &g * g.adjoint();
            let tr = gg.trace().re;
            let op = HermitianOperator::symmetrized(gg / C64::new(tr, 0.0));
            if op.rank_eps(tol)? == rank {
                return Ok(DensityOperator::new_unchecked(op));
            }
        }
        // only reachable with a rank cutoff far above the default
        Err(Error::InvalidParameter(format!(
            "no rank-{rank} state in {MAX_RANK_ATTEMPTS} draws under rank cutoff {}",
            tol.rank
        )))
    }

    /// Haar-random pure state.
    pub fn pure(&mut self, d: usize) -> DensityOperator {
        DensityOperator::pure(&self.unit_vector(d))
    }

    /// Traceless part of a GUE sample.
    pub fn perturbation(&mut self, d: usize, tol: &Tolerances) -> PerturbationOperator {
        loop {
            let h = self.hermitian(d);
            if let Ok(p) = PerturbationOperator::from_traceless_part(&h, tol) {
                return p;
            }
        }
    }

    pub fn unit_bloch(&mut self) -> [f64; 3] {
        loop {
            let v = [self.gaussian(), self.gaussian(), self.gaussian()];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 1e-12 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }

    /// Uniform point in the closed unit ball.
    pub fn bloch_in_ball(&mut self) -> BlochVector {
        loop {
            let r = [
                self.uniform(-1.0, 1.0),
                self.uniform(-1.0, 1.0),
                self.uniform(-1.0, 1.0),
            ];
            if r.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                return BlochVector::from_components_unchecked(r);
            }
        }
    }
}

pub fn random_state(d: usize, rank: usize, seed: u64, tol: &Tolerances) -> Result<DensityOperator> {
    Sampler::new(seed).state(d, rank, tol)
}

pub fn random_pure(d: usize, seed: u64) -> DensityOperator {
    Sampler::new(seed).pure(d)
}

pub fn random_perturbation(d: usize, seed: u64, tol: &Tolerances) -> PerturbationOperator {
    Sampler::new(seed).perturbation(d, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_exact() {
        let tol = Tolerances::default();
        for seed in 0..200 {
            let rho = random_state(4, 2, seed, &tol).unwrap();
            assert_eq!(rho.rank(&tol).unwrap(), 2);
            assert!((rho.op().trace() - 1.0).abs() < 1e-12);
        }
        for d in 2..=6 {
            for r in 1..=d {
                assert_eq!(random_state(d, r, 7, &tol).unwrap().rank(&tol).unwrap(), r);
            }
        }
        assert!(matches!(random_state(3, 0, 1, &tol), Err(Error::InvalidRank { .. })));
        assert!(matches!(random_state(3, 4, 1, &tol), Err(Error::InvalidRank { .. })));
    }

    #[test]
    fn perturbations_are_traceless() {
        let tol = Tolerances::default();
        for seed in 0..200 {
            let p = random_perturbation(2 + (seed as usize) % 5, seed, &tol);
            assert!(p.op().trace().abs() <= tol.num * p.op().hs_norm());
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let tol = Tolerances::default();
        assert_eq!(random_state(5, 3, 42, &tol).unwrap(), random_state(5, 3, 42, &tol).unwrap());
        assert_eq!(random_pure(4, 9), random_pure(4, 9));
        assert_eq!(random_perturbation(3, 1, &tol), random_perturbation(3, 1, &tol));
        assert_ne!(random_pure(4, 9), random_pure(4, 10));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| derive_seed(5, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn ball_samples_stay_in_ball() {
        let mut s = Sampler::new(3);
        for _ in 0..1000 {
            assert!(s.bloch_in_ball().norm() <= 1.0);
        }
    }
}
