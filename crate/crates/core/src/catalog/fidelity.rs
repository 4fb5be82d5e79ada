//! Fidelity with a reference state, `F(ϱ, σ) ≥ ε`.
//!
//! When `σ` is rank-deficient, any `Δ` with `√σ Δ √σ = 0` leaves `F(·, σ)` unchanged, so a
//! measurement blind to exactly those directions still solves the problem.

use nalgebra::DMatrix;
use serde_json::{json, Map};

use super::{levelset_evidence, state_json, BoundKind, CatalogVerdict, Evidence, OutcomeBound, EVIDENCE_DIRECTIONS};
use crate::error::{Error, Result};
use crate::meas::{povm_from_operator_system, OperatorSystem};
use crate::opspace::{gell_mann_basis, HermitianOperator, Tolerances, C64};
use crate::states::{fidelity, feasible_interval, DensityOperator, Functional, PerturbationOperator, Sampler};

/// Samples used to confirm fidelity invariance inside a verdict.
const INVARIANCE_SAMPLES: usize = 200;

/// Orthonormal basis of `{Δ traceless : ⟨φ_j|Δ|φ_k⟩ = 0 for j, k ≤ r}`, of size `d² − r² − 1`:
/// the support–kernel coherences and the traceless kernel block, in `σ`'s eigenbasis.
pub fn fidelity_blind_subspace(sigma: &DensityOperator, tol: &Tolerances) -> Result<Vec<PerturbationOperator>> {
    let d = sigma.dim();
    let r = sigma.rank(tol)?;
    let spec = sigma.op().spectral()?;
    let u = spec.eigenvectors();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d - r * r - 1);
    for j in 0..r {
        for k in r..d {
            let a = u.column(j).into_owned();
            let b = u.column(k).into_owned();
            let outer = &a * b.adjoint();
            let re = (&outer + outer.adjoint()) * C64::new(s, 0.0);
            let im = (&outer - outer.adjoint()) * C64::new(0.0, s);
            out.push(PerturbationOperator::new_unchecked(HermitianOperator::symmetrized(re)));
            out.push(PerturbationOperator::new_unchecked(HermitianOperator::symmetrized(im)));
        }
    }
    if d - r >= 2 {
        let w: DMatrix<C64> = u.columns(r, d - r).into_owned();
        for g in gell_mann_basis(d - r) {
            let m = &w * g.matrix() * w.adjoint();
            out.push(PerturbationOperator::new_unchecked(HermitianOperator::symmetrized(m)));
        }
    }
    debug_assert_eq!(out.len(), d * d - r * r - 1);
    Ok(out)
}

/// Largest `|F(ϱ + λΔ, σ) − F(ϱ, σ)|` over random states, random blind directions and random
/// feasible steps.
pub(crate) fn blind_invariance_deviation(
    sigma: &DensityOperator,
    blind: &[PerturbationOperator],
    samples: usize,
    sampler: &mut Sampler,
    tol: &Tolerances,
) -> Result<f64> {
    let d = sigma.dim();
    let mut worst: f64 = 0.0;
    if blind.is_empty() {
        return Ok(worst);
    }
    for k in 0..samples {
        let rank = if k % 4 == 3 { 1 + sampler.index(d) } else { d };
        let rho = sampler.state(d, rank, tol)?;
        let mut comb = HermitianOperator::zeros(d);
        for b in blind {
            comb = &comb + &b.op().scaled(sampler.gaussian());
        }
        let Ok(delta) = PerturbationOperator::new(comb, tol) else {
            continue;
        };
        let iv = feasible_interval(&rho, &delta, tol)?;
        if iv.is_trivial(0.0) {
            continue;
        }
        let lambda = sampler.uniform(iv.lo, iv.hi);
        let moved = DensityOperator::new_unchecked(rho.op() + &delta.op().scaled(lambda));
        let change = (fidelity(&moved, sigma, tol)? - fidelity(&rho, sigma, tol)?).abs();
        worst = worst.max(change);
    }
    Ok(worst)
}

pub fn fidelity_analysis(sigma: &DensityOperator, eps: f64, seed: u64, tol: &Tolerances) -> Result<CatalogVerdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("fidelity level {eps} outside (0, 1)")));
    }
    let d = sigma.dim();
    let r = sigma.rank(tol)?;
    let mut params = Map::new();
    params.insert("d".into(), json!(d));
    params.insert("eps".into(), json!(eps));
    params.insert("rank".into(), json!(r));
    params.insert("sigma".into(), state_json(sigma));
    let mut v = CatalogVerdict::new("fidelity", params, seed);

    if r == d {
        let f = Functional::Fidelity(sigma.clone()).negated();
        let floor = -f.extremes(d, tol)?.max;
        if eps <= floor + tol.num {
            return Err(Error::InvalidParameter(format!(
                "every state has fidelity at least {floor} with σ; level {eps} leaves one block empty"
            )));
        }
        v.ic_required = true;
        v.evidence = levelset_evidence(&f, -eps, d, EVIDENCE_DIRECTIONS, seed, tol)?;
        return Ok(v);
    }

    let blind = fidelity_blind_subspace(sigma, tol)?;
    let mut sampler = Sampler::new(seed);
    let worst = blind_invariance_deviation(sigma, &blind, INVARIANCE_SAMPLES, &mut sampler, tol)?;
    if worst > tol.num {
        return Err(Error::Verification(format!(
            "fidelity changed by {worst:e} along a blind direction"
        )));
    }
    let ops: Vec<HermitianOperator> = blind.iter().map(|b| b.op().clone()).collect();
    let system = OperatorSystem::annihilating(d, &ops, tol)?;
    let povm = povm_from_operator_system(&system, tol)?;
    v.witness = Some(blind[0].clone());
    v.min_outcomes = Some(OutcomeBound {
        value: r * r + 1,
        kind: BoundKind::Upper,
    });
    v.evidence = vec![
        Evidence::BlindSubspace {
            size: blind.len(),
            samples: INVARIANCE_SAMPLES,
            max_fidelity_change: worst,
        },
        Evidence::Povm {
            outcomes: povm.len(),
            povm,
        },
    ];
    v.check()?;
    Ok(v)
}
