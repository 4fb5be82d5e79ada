//! Identifying a fixed state `σ`.
//!
//! A full-rank `σ` is interior, so every direction crosses out of `{σ}` and informational
//! completeness is needed. For rank `r < d`, `σ` sits on the face of states supported on
//! `supp σ`; measuring an IC POVM on that face plus the projector `I − Q` onto its complement
//! solves the problem with `r² + 1` outcomes, and no fewer will do.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map};

use super::problems::exact_id_problem;
use super::{state_json, BoundKind, CatalogVerdict, Evidence, OutcomeBound, EVIDENCE_DIRECTIONS};
use crate::error::{Error, Result};
use crate::meas::{operator_system_from_povm, orthocomplement, povm_from_operator_system, OperatorSystem, Povm};
use crate::membership::boundary_criterion_witness;
use crate::opspace::{gell_mann_basis, HermitianOperator, Tolerances, C64};
use crate::states::sampling::derive_seed;
use crate::states::{
    feasible_interval, support_projection, DensityOperator, PerturbationOperator, Sampler,
};

fn support_basis(sigma: &DensityOperator, tol: &Tolerances) -> Result<(usize, DMatrix<C64>)> {
    let spec = sigma.op().spectral()?;
    let r = sigma.rank(tol)?;
    Ok((r, spec.eigenvectors().clone()))
}

fn embed(v: &DMatrix<C64>, a: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::symmetrized(v * a.matrix() * v.adjoint())
}

/// `|φ_r⟩⟨φ_{r+1}| + |φ_{r+1}⟩⟨φ_r|` for the last support eigenvector and the first kernel
/// eigenvector of `σ`. Its 2×2 block against `σ` is `[[μ_r, λ], [λ, 0]]`, so it leaves the
/// state space immediately in both directions.
pub fn exact_id_witness(sigma: &DensityOperator, tol: &Tolerances) -> Result<PerturbationOperator> {
    let d = sigma.dim();
    let (r, vecs) = support_basis(sigma, tol)?;
    if r == d {
        return Err(Error::InvalidRank { rank: r, dim: d });
    }
    let a = vecs.column(r - 1).into_owned();
    let b = vecs.column(r).into_owned();
    PerturbationOperator::new(HermitianOperator::symmetric_outer(&a, &b), tol)
}

/// `r² + 1`-outcome POVM: an IC POVM on the face of `σ`, embedded, plus `I − Q`.
pub fn exact_id_povm(sigma: &DensityOperator, tol: &Tolerances) -> Result<Povm> {
    let d = sigma.dim();
    let (r, vecs) = support_basis(sigma, tol)?;
    if r == d {
        return Err(Error::InvalidRank { rank: r, dim: d });
    }
    let v = vecs.columns(0, r).into_owned();
    let q = HermitianOperator::symmetrized(&v * v.adjoint());
    let mut elements: Vec<HermitianOperator> = if r == 1 {
        vec![q.clone()]
    } else {
        let face = povm_from_operator_system(&OperatorSystem::full(r), tol)?;
        face.elements().iter().map(|e| embed(&v, e)).collect()
    };
    elements.push(&HermitianOperator::identity(d) - &q);
    let povm = Povm::new(elements, tol)?;

    let system = operator_system_from_povm(&povm, tol);
    if system.size() != r * r + 1 {
        return Err(Error::Verification(format!(
            "exact-identification POVM spans {} dimensions, expected {}",
            system.size(),
            r * r + 1
        )));
    }
    for delta in orthocomplement(&system, tol) {
        let iv = feasible_interval(sigma, &delta, tol)?;
        if !iv.is_trivial(tol.num) {
            return Err(Error::Verification(format!(
                "unmeasured direction moves σ within the state space ({:e}, {:e})",
                iv.lo, iv.hi
            )));
        }
    }
    Ok(povm)
}

/// `B = λ[σ − (tϱ + (1 − t)τ)]` with `ϱ` on the face of `σ`.
#[derive(Clone, Debug, Serialize)]
pub struct SegmentDecomposition {
    pub lambda: f64,
    pub t: f64,
    pub state: DensityOperator,
    pub residual: f64,
}

/// Basis of an `r²`-dimensional space of directions, each of which separates `σ` from some
/// other state; no solving measurement can be blind to any of them.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundSpace {
    pub tau: DensityOperator,
    pub basis: Vec<PerturbationOperator>,
    pub decompositions: Vec<SegmentDecomposition>,
}

/// `T₀(σ) ⊕ span{σ − τ}`, where `T₀(σ)` are the traceless operators supported on `supp σ`.
/// `τ` defaults to `I/d` and must not be supported inside `supp σ`.
pub fn exact_id_lowerbound_space(
    sigma: &DensityOperator,
    tau: Option<&DensityOperator>,
    tol: &Tolerances,
) -> Result<LowerBoundSpace> {
    let d = sigma.dim();
    let (r, vecs) = support_basis(sigma, tol)?;
    if r == d {
        return Err(Error::InvalidRank { rank: r, dim: d });
    }
    let tau = tau.cloned().unwrap_or_else(|| DensityOperator::maximally_mixed(d));
    if tau.dim() != d {
        return Err(Error::DimensionMismatch(d, tau.dim()));
    }
    let q = support_projection(sigma, tol)?;
    let outside = &HermitianOperator::identity(d) - &q;
    let tau_out = outside.hs_inner(tau.op())?;
    if tau_out <= tol.rank {
        return Err(Error::InvalidParameter(
            "τ must not be supported inside the support of σ".into(),
        ));
    }

    let v = vecs.columns(0, r).into_owned();
    let mut gens: Vec<HermitianOperator> = if r >= 2 {
        gell_mann_basis(r).iter().map(|g| embed(&v, g)).collect()
    } else {
        Vec::new()
    };
    let shift = sigma.op() - tau.op();
    gens.push(shift.clone());
    let system = OperatorSystem::from_generators(d, &gens, tol)?;
    let basis: Vec<HermitianOperator> = system.basis()[1..].to_vec();
    if basis.len() != r * r {
        return Err(Error::Verification(format!(
            "lower-bound space has dimension {}, expected {}",
            basis.len(),
            r * r
        )));
    }

    let mut decompositions = Vec::with_capacity(basis.len());
    for b in &basis {
        let mu = -outside.hs_inner(b)? / tau_out;
        let inner = b - &shift.scaled(mu);
        let (lambda, t, state) = if inner.hs_norm() <= tol.num {
            (mu, 0.0, sigma.clone())
        } else {
            let back = PerturbationOperator::new(-&inner, tol)?;
            let iv = feasible_interval(sigma, &back, tol)?;
            let step = if mu >= 0.0 { 0.5 * iv.hi } else { 0.5 * iv.lo };
            if step == 0.0 {
                return Err(Error::Verification(
                    "face direction does not move σ within its face".into(),
                ));
            }
            let lambda0 = 1.0 / step;
            let state = sigma.perturbed(step, &back, tol)?;
            (lambda0 + mu, lambda0 / (lambda0 + mu), state)
        };
        let mix = &state.op().scaled(t) + &tau.op().scaled(1.0 - t);
        let rebuilt = (sigma.op() - &mix).scaled(lambda);
        let residual = (&rebuilt - b).hs_norm();
        let off_face = outside.hs_inner(state.op())?;
        if residual > tol.num || off_face > tol.rank || !(0.0..=1.0).contains(&t) {
            return Err(Error::Verification(format!(
                "lower-bound decomposition failed (residual {residual:e}, off-face weight {off_face:e}, t = {t})"
            )));
        }
        decompositions.push(SegmentDecomposition {
            lambda,
            t,
            state,
            residual,
        });
    }
    Ok(LowerBoundSpace {
        tau,
        basis: basis.into_iter().map(PerturbationOperator::new_unchecked).collect(),
        decompositions,
    })
}

pub fn exact_id_analysis(sigma: &DensityOperator, seed: u64, tol: &Tolerances) -> Result<CatalogVerdict> {
    let d = sigma.dim();
    let r = sigma.rank(tol)?;
    let mut params = Map::new();
    params.insert("d".into(), json!(d));
    params.insert("rank".into(), json!(r));
    params.insert("sigma".into(), state_json(sigma));
    let mut v = CatalogVerdict::new("exact_id", params, seed);

    if r == d {
        let problem = exact_id_problem(sigma, tol)?;
        let witnesses: Vec<Evidence> = (0..EVIDENCE_DIRECTIONS)
            .into_par_iter()
            .map(|k| {
                let delta = Sampler::new(derive_seed(seed, k as u64)).perturbation(d, tol);
                boundary_criterion_witness(&problem, "sigma", &delta, tol)
                    .map(|witness| Evidence::Crossing { witness })
            })
            .collect::<Result<_>>()?;
        v.ic_required = true;
        v.evidence = witnesses;
        return Ok(v);
    }

    let delta = exact_id_witness(sigma, tol)?;
    let interval = feasible_interval(sigma, &delta, tol)?;
    if !interval.is_trivial(tol.num) {
        return Err(Error::Verification(format!(
            "witness direction has a nontrivial feasible interval ({:e}, {:e})",
            interval.lo, interval.hi
        )));
    }
    let povm = exact_id_povm(sigma, tol)?;
    let space = exact_id_lowerbound_space(sigma, None, tol)?;
    v.witness = Some(delta.clone());
    v.min_outcomes = Some(OutcomeBound {
        value: r * r + 1,
        kind: BoundKind::Exact,
    });
    v.evidence = vec![
        Evidence::NegativeMinor { delta, interval },
        Evidence::Povm {
            outcomes: povm.len(),
            povm,
        },
        Evidence::LowerBoundSpace(space),
    ];
    v.check()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::Sampler;

    fn t() -> Tolerances {
        Tolerances::default()
    }

    fn diag(x: &[f64]) -> DensityOperator {
        DensityOperator::from_diagonal(x, &t()).unwrap()
    }

    #[test]
    fn full_rank_requires_ic() {
        let v = exact_id_analysis(&DensityOperator::maximally_mixed(3), 1, &t()).unwrap();
        assert!(v.ic_required);
        assert_eq!(v.crossings().count(), EVIDENCE_DIRECTIONS);
        assert!(v.witness.is_none());
    }

    #[test]
    fn pure_qubit_needs_two_outcomes() {
        let tol = t();
        let sigma = diag(&[1.0, 0.0]);
        let v = exact_id_analysis(&sigma, 1, &tol).unwrap();
        assert!(!v.ic_required);
        assert_eq!(v.min_outcomes, Some(OutcomeBound { value: 2, kind: BoundKind::Exact }));
        let p = exact_id_povm(&sigma, &tol).unwrap();
        assert_eq!(p.len(), 2);
        assert!((&p.elements()[0] - sigma.op()).hs_norm() < 1e-14);
        let space = exact_id_lowerbound_space(&sigma, None, &tol).unwrap();
        assert_eq!(space.basis.len(), 1);
        let expected = (sigma.op() - DensityOperator::maximally_mixed(2).op()).scaled(2f64.sqrt());
        let b = space.basis[0].op();
        assert!((b - &expected).hs_norm() < 1e-12 || (b + &expected).hs_norm() < 1e-12);
    }

    #[test]
    fn negative_minor_example() {
        let tol = t();
        let sigma = diag(&[0.5, 0.5, 0.0, 0.0]);
        let delta = exact_id_witness(&sigma, &tol).unwrap();
        let iv = feasible_interval(&sigma, &delta, &tol).unwrap();
        assert_eq!((iv.lo, iv.hi), (0.0, 0.0));
        assert_eq!(exact_id_povm(&sigma, &tol).unwrap().len(), 5);
        assert_eq!(exact_id_lowerbound_space(&sigma, None, &tol).unwrap().basis.len(), 4);
    }

    #[test]
    fn qutrit_rank_two_povm_has_five_outcomes() {
        let p = exact_id_povm(&diag(&[0.5, 0.5, 0.0]), &t()).unwrap();
        assert_eq!(p.len(), 5);
    }

    #[test]
    fn random_sigma_consistency() {
        let tol = t();
        let mut s = Sampler::new(31);
        for d in 2..=5 {
            for r in 1..d {
                for _ in 0..15 {
                    let sigma = s.state(d, r, &tol).unwrap();
                    let p = exact_id_povm(&sigma, &tol).unwrap();
                    assert_eq!(p.len(), r * r + 1);
                    assert_eq!(operator_system_from_povm(&p, &tol).size(), r * r + 1);
                    let space = exact_id_lowerbound_space(&sigma, None, &tol).unwrap();
                    assert_eq!(space.basis.len(), r * r);
                    for (a, x) in space.basis.iter().enumerate() {
                        for (b, y) in space.basis.iter().enumerate() {
                            let want = if a == b { 1.0 } else { 0.0 };
                            assert!((x.op().hs_inner(y.op()).unwrap() - want).abs() <= tol.num);
                        }
                    }
                    let w = exact_id_witness(&sigma, &tol).unwrap();
                    assert!(feasible_interval(&sigma, &w, &tol).unwrap().is_trivial(1e-8));
                }
            }
        }
    }

    #[test]
    fn tau_inside_support_is_rejected() {
        let tol = t();
        let sigma = diag(&[0.5, 0.5, 0.0]);
        let tau = diag(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            exact_id_lowerbound_space(&sigma, Some(&tau), &tol),
            Err(Error::InvalidParameter(_))
        ));
        assert!(exact_id_povm(&DensityOperator::maximally_mixed(2), &tol).is_err());
    }
}
