//! Rank threshold `rank ϱ ≤ r` against `rank ϱ > r`.
//!
//! IC measurements are needed exactly when `r ≥ ⌊d/2⌋`. Below that, a balanced direction with
//! `⌊d/2⌋` positive and `⌊d/2⌋` negative eigenvalues can only be realised by pairs of high-rank
//! states, so a measurement blind to it still separates the blocks.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Map};

use super::problems::rank_problem;
use super::{check_dim, BoundKind, CatalogVerdict, Evidence, OutcomeBound, EVIDENCE_DIRECTIONS};
use crate::error::{Error, Result};
use crate::meas::{distinguishes, OperatorSystem};
use crate::membership::CrossingWitness;
use crate::opspace::{spectrum_scale, HermitianOperator, Tolerances, C64};
use crate::states::sampling::derive_seed;
use crate::states::{DensityOperator, PerturbationOperator, Sampler};

/// Probe states used by the falsification inside a verdict.
const VERDICT_PROBE_STATES: usize = 500;

/// Step magnitudes `10^{-3}, 10^{-2.5}, …, 10`, each probed with both signs.
fn probe_steps() -> impl Iterator<Item = f64> {
    (0..9).flat_map(|k| {
        let t = 1e-3 * 10f64.powf(k as f64 / 2.0);
        [t, -t]
    })
}

/// Probes per sampled state in [`falsification_probes`].
pub const PROBES_PER_STATE: usize = 18;

/// `Δ = Δ₊ − Δ₋` with eigenvalues inside the rank cutoff dropped, plus a basis of the kernel.
struct Split {
    plus: HermitianOperator,
    minus: HermitianOperator,
    plus_rank: usize,
    minus_rank: usize,
    kernel: DMatrix<C64>,
}

impl Split {
    fn of(delta: &HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let spec = delta.spectral()?;
        let e = spec.eigenvalues();
        let cut = tol.rank * spectrum_scale(e);
        let plus_rank = e.iter().filter(|&&x| x > cut).count();
        let minus_rank = e.iter().filter(|&&x| x < -cut).count();
        let kernel = spec.columns(plus_rank..delta.dim() - minus_rank);
        Ok(Self {
            plus: HermitianOperator::symmetrized(spec.map(|x| if x > cut { x } else { 0.0 })),
            minus: HermitianOperator::symmetrized(spec.map(|x| if x < -cut { -x } else { 0.0 })),
            plus_rank,
            minus_rank,
            kernel,
        })
    }

    fn abs(&self) -> HermitianOperator {
        &self.plus + &self.minus
    }

    /// Projector onto the first `k` kernel vectors.
    fn padding(&self, k: usize) -> HermitianOperator {
        let w = self.kernel.columns(0, k);
        HermitianOperator::symmetrized(w * w.adjoint())
    }
}

fn check_rank(d: usize, r: usize) -> Result<()> {
    check_dim(d)?;
    if r == 0 || r >= d {
        return Err(Error::InvalidRank { rank: r, dim: d });
    }
    Ok(())
}

fn normalized_state(op: HermitianOperator, tol: &Tolerances) -> Result<DensityOperator> {
    let tr = op.trace();
    DensityOperator::new(op.scaled(1.0 / tr), tol)
}

/// Balanced `diag(1, …, 1, −1, …, −1, 0)/⌊d/2⌋`, for `r < ⌊d/2⌋`.
pub fn rank_witness_direction(d: usize, r: usize, tol: &Tolerances) -> Result<PerturbationOperator> {
    check_rank(d, r)?;
    let h = d / 2;
    if r >= h {
        return Err(Error::InvalidParameter(format!(
            "no rank witness for r = {r} ≥ ⌊d/2⌋ = {h}"
        )));
    }
    let mut diag = vec![0.0; d];
    for j in 0..h {
        diag[j] = 1.0 / h as f64;
        diag[h + j] = -1.0 / h as f64;
    }
    PerturbationOperator::new(HermitianOperator::from_real_diagonal(&diag), tol)
}

/// For `r ≥ ⌊d/2⌋`, a state `ϱ` of rank `> r` with `ϱ + λΔ` of rank `≤ r`.
pub fn rank_crossing_witness(
    delta: &PerturbationOperator,
    r: usize,
    tol: &Tolerances,
) -> Result<(DensityOperator, f64)> {
    let d = delta.dim();
    check_rank(d, r)?;
    if r < d / 2 {
        return Err(Error::InvalidParameter(format!(
            "crossing construction needs r ≥ ⌊d/2⌋, got r = {r}, d = {d}"
        )));
    }
    let s = Split::of(delta.op(), tol)?;
    let (rho, lambda) = if s.minus_rank > r {
        let tr = s.minus.trace();
        (normalized_state(s.minus.clone(), tol)?, 1.0 / tr)
    } else if s.plus_rank > r {
        let tr = s.plus.trace();
        (normalized_state(s.plus.clone(), tol)?, -1.0 / tr)
    } else if s.plus_rank + s.minus_rank > r {
        let abs = s.abs();
        let tr = abs.trace();
        (normalized_state(abs, tol)?, 1.0 / tr)
    } else {
        let padded = &s.abs() + &s.padding(r + 1 - s.plus_rank - s.minus_rank);
        let tr = padded.trace();
        (normalized_state(padded, tol)?, 1.0 / tr)
    };
    let target = rho.perturbed(lambda, delta, tol)?;
    let (before, after) = (rho.rank(tol)?, target.rank(tol)?);
    if before <= r || after > r {
        return Err(Error::Verification(format!(
            "rank crossing failed: rank {before} → {after} at threshold {r}"
        )));
    }
    Ok((rho, lambda))
}

/// Given `ϱ₁, ϱ₂` of rank `≤ r`, writes `ϱ₁ − ϱ₂ = λ(ϱ − σ)` with `rank ϱ ≤ r < rank σ`.
pub fn rank_indistinguishability_lift(
    rho1: &DensityOperator,
    rho2: &DensityOperator,
    r: usize,
    tol: &Tolerances,
) -> Result<(DensityOperator, DensityOperator, f64)> {
    let d = rho1.dim();
    if rho2.dim() != d {
        return Err(Error::DimensionMismatch(d, rho2.dim()));
    }
    check_rank(d, r)?;
    for rho in [rho1, rho2] {
        let k = rho.rank(tol)?;
        if k > r {
            return Err(Error::InvalidParameter(format!("input state has rank {k} > {r}")));
        }
    }
    let delta = rho1.op() - rho2.op();
    if delta.hs_norm() <= tol.num {
        return Err(Error::ZeroPerturbation);
    }
    let s = Split::of(&delta, tol)?;
    let low = s.minus.scaled(2.0);
    let (low, high) = if s.plus_rank + s.minus_rank > r {
        (low, s.abs())
    } else {
        let p = s.padding(r + 1 - s.plus_rank - s.minus_rank);
        (&low + &p, &s.abs() + &p)
    };
    let tr = high.trace();
    let rho = normalized_state(low, tol)?;
    let sigma = normalized_state(high, tol)?;
    let lambda = -tr;
    let residual = (&(rho.op() - sigma.op()).scaled(lambda) - &delta).hs_norm();
    let (lo_rank, hi_rank) = (rho.rank(tol)?, sigma.rank(tol)?);
    if residual > tol.num || lo_rank > r || hi_rank <= r {
        return Err(Error::Verification(format!(
            "rank lift failed: residual {residual:e}, ranks {lo_rank} and {hi_rank} at threshold {r}"
        )));
    }
    Ok((rho, sigma, lambda))
}

/// `4r(d − r) + d − 2r` outcomes; trivial once `r ≥ ⌊d/2⌋`.
pub fn rank_outcome_bound(d: usize, r: usize) -> Result<OutcomeBound> {
    check_rank(d, r)?;
    Ok(OutcomeBound {
        value: 4 * r * (d - r) + d - 2 * r,
        kind: if r >= d / 2 { BoundKind::Trivial } else { BoundKind::Upper },
    })
}

/// Samples `n_states` states of rank `≤ r` and steps each along `±Δ` over [`probe_steps`].
/// Returns `(probes, crossings)`, a crossing being any probe that lands inside the state space.
pub fn falsification_probes(
    delta: &PerturbationOperator,
    r: usize,
    n_states: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<(usize, usize)> {
    let d = delta.dim();
    let crossings = (0..n_states)
        .into_par_iter()
        .map(|k| {
            let mut s = Sampler::new(derive_seed(seed, k as u64));
            let rank = 1 + s.index(r);
            let rho = s.state(d, rank, tol)?;
            let mut hits = 0;
            for t in probe_steps() {
                let moved = rho.op() + &delta.op().scaled(t);
                if moved.is_positive(tol)? {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok((n_states * PROBES_PER_STATE, crossings))
}

pub fn rank_threshold_analysis(d: usize, r: usize, seed: u64, tol: &Tolerances) -> Result<CatalogVerdict> {
    let problem = rank_problem(d, r, tol)?;
    let mut params = Map::new();
    params.insert("d".into(), json!(d));
    params.insert("r".into(), json!(r));
    let mut v = CatalogVerdict::new("rank_threshold", params, seed);
    v.min_outcomes = Some(rank_outcome_bound(d, r)?);
    let h = d / 2;

    if r >= h {
        let witnesses: Vec<CrossingWitness> = (0..EVIDENCE_DIRECTIONS)
            .into_par_iter()
            .map(|k| {
                let delta = Sampler::new(derive_seed(seed, k as u64)).perturbation(d, tol);
                let (state, lambda) = rank_crossing_witness(&delta, r, tol)?;
                let w = CrossingWitness {
                    delta,
                    state,
                    lambda,
                    from_block: "high_rank".into(),
                    to_block: "low_rank".into(),
                };
                w.verify(&problem, tol)?;
                Ok(w)
            })
            .collect::<Result<_>>()?;
        v.ic_required = true;
        v.evidence = witnesses.into_iter().map(|witness| Evidence::Crossing { witness }).collect();
        return Ok(v);
    }

    let delta = rank_witness_direction(d, r, tol)?;
    let s = Split::of(delta.op(), tol)?;
    let mut first = vec![0.0; d];
    let mut second = vec![0.0; d];
    for j in 0..h {
        first[j] = 1.0 / h as f64;
        second[h + j] = 1.0 / h as f64;
    }
    let first = DensityOperator::from_diagonal(&first, tol)?;
    let second = DensityOperator::from_diagonal(&second, tol)?;
    let system = OperatorSystem::annihilating(d, &[delta.op().clone()], tol)?;
    let residual = system.project(&(first.op() - second.op()))?.hs_norm();
    if residual > tol.num || distinguishes(&system, &first, &second, tol)? {
        return Err(Error::Verification(
            "balanced pair is distinguished by the complement system".into(),
        ));
    }
    let (probes, crossings) = falsification_probes(&delta, r, VERDICT_PROBE_STATES, seed, tol)?;
    if crossings > 0 {
        return Err(Error::Verification(format!(
            "rank witness crossed in {crossings} of {probes} probes"
        )));
    }
    v.witness = Some(delta);
    v.evidence = vec![
        Evidence::RankMinimality {
            plus_rank: s.plus_rank,
            minus_rank: s.minus_rank,
            threshold: r,
        },
        Evidence::IndistinguishablePair {
            first,
            second,
            projection_residual: residual,
        },
        Evidence::Falsification { probes, crossings },
    ];
    v.check()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn witness_for_d4_r1() {
        let tol = t();
        let v = rank_threshold_analysis(4, 1, 7, &tol).unwrap();
        assert!(!v.ic_required);
        let expected = HermitianOperator::from_real_diagonal(&[0.5, 0.5, -0.5, -0.5]);
        assert!((v.witness.as_ref().unwrap().op() - &expected).hs_norm() < 1e-15);
        assert_eq!(v.min_outcomes, Some(OutcomeBound { value: 14, kind: BoundKind::Upper }));
    }

    #[test]
    fn case_c_example() {
        let tol = t();
        let delta = PerturbationOperator::new(HermitianOperator::from_real_diagonal(&[1.0, -1.0, 0.0, 0.0]), &tol).unwrap();
        let (rho, lambda) = rank_crossing_witness(&delta, 2, &tol).unwrap();
        assert_eq!(rho.rank(&tol).unwrap(), 3);
        assert!(rho.perturbed(lambda, &delta, &tol).unwrap().rank(&tol).unwrap() <= 2);
    }

    #[test]
    fn crossings_for_all_high_thresholds() {
        let tol = t();
        let mut s = Sampler::new(5);
        for d in 2..=6 {
            for r in d / 2..d {
                for _ in 0..50 {
                    let delta = s.perturbation(d, &tol);
                    rank_crossing_witness(&delta, r, &tol).unwrap();
                }
                // low-rank directions exercise the padded case
                let a = s.pure(d);
                let b = s.pure(d);
                let delta = PerturbationOperator::new(a.op() - b.op(), &tol).unwrap();
                rank_crossing_witness(&delta, r, &tol).unwrap();
            }
        }
    }

    #[test]
    fn lifts() {
        let tol = t();
        let mut s = Sampler::new(6);
        for k in 0..300 {
            let d = 2 + k % 5;
            let r = 1 + s.index(d - 1);
            let (k1, k2) = (1 + s.index(r), 1 + s.index(r));
            let a = s.state(d, k1, &tol).unwrap();
            let b = s.state(d, k2, &tol).unwrap();
            let (rho, sigma, lambda) = rank_indistinguishability_lift(&a, &b, r, &tol).unwrap();
            let rebuilt = (rho.op() - sigma.op()).scaled(lambda);
            assert!((&rebuilt - &(a.op() - b.op())).hs_norm() <= 1e-9);
        }
        let p = DensityOperator::basis_state(3, 0);
        assert!(rank_indistinguishability_lift(&p, &p, 1, &tol).is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(rank_outcome_bound(5, 2).unwrap(), OutcomeBound { value: 25, kind: BoundKind::Trivial });
        assert_eq!(rank_outcome_bound(4, 2).unwrap().value, 16);
        assert_eq!(rank_outcome_bound(6, 1).unwrap(), OutcomeBound { value: 24, kind: BoundKind::Upper });
        assert!(rank_outcome_bound(4, 4).is_err());
        assert!(rank_outcome_bound(4, 0).is_err());
    }

    #[test]
    fn ic_verdicts_carry_crossings() {
        let tol = t();
        let v = rank_threshold_analysis(5, 3, 1, &tol).unwrap();
        assert!(v.ic_required);
        assert_eq!(v.crossings().count(), EVIDENCE_DIRECTIONS);
        assert!(rank_witness_direction(4, 2, &tol).is_err());
        assert!(rank_threshold_analysis(4, 4, 1, &tol).is_err());
    }
}
