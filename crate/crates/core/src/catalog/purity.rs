//! Pure versus mixed, and the "almost pure" level-set variants.
//!
//! For qubits and qutrits every direction is, up to scale, a difference of a pure and a mixed
//! state, so every direction crosses. From `d = 4` on, `P₁ + P₂ − P₃ − P₄` has two positive and
//! two negative eigenvalues, and by rank minimality neither side of any decomposition of it can
//! be pure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use super::problems::purity_problem;
use super::rank::{falsification_probes, rank_outcome_bound};
use super::{check_dim, levelset_evidence, CatalogVerdict, Evidence, EVIDENCE_DIRECTIONS};
use crate::error::{Error, Result};
use crate::meas::{distinguishes, orthocomplement, OperatorSystem};
use crate::membership::{levelset_problem, CrossingWitness};
use crate::opspace::{rank_of_spectrum, HermitianOperator, Tolerances};
use crate::states::sampling::derive_seed;
use crate::states::{DensityOperator, Functional, PerturbationOperator, Sampler};

/// Probes used by the `d ≥ 4` falsification inside a verdict.
const VERDICT_PROBE_STATES: usize = 500;

/// `Δ = λ(pure − mixed)`.
#[derive(Clone, Debug, Serialize)]
pub struct PureMixedDecomposition {
    pub lambda: f64,
    pub pure: DensityOperator,
    pub mixed: DensityOperator,
    pub residual: f64,
}

impl PureMixedDecomposition {
    fn build(
        delta: &PerturbationOperator,
        lambda: f64,
        pure: HermitianOperator,
        mixed: HermitianOperator,
        tol: &Tolerances,
    ) -> Result<Self> {
        let pure = DensityOperator::new(pure, tol)?;
        let mixed = DensityOperator::new(mixed, tol)?;
        let rebuilt = (pure.op() - mixed.op()).scaled(lambda);
        let residual = (&rebuilt - delta.op()).hs_norm();
        if residual > tol.num * delta.op().hs_norm() {
            return Err(Error::Verification(format!(
                "pure/mixed decomposition residual {residual:e}"
            )));
        }
        Ok(Self {
            lambda,
            pure,
            mixed,
            residual,
        })
    }

    /// `mixed + Δ/λ = pure`, read as a crossing out of the mixed block.
    pub fn crossing(&self, delta: &PerturbationOperator) -> CrossingWitness {
        CrossingWitness {
            delta: delta.clone(),
            state: self.mixed.clone(),
            lambda: 1.0 / self.lambda,
            from_block: "mixed".into(),
            to_block: "pure".into(),
        }
    }
}

/// `Δ = e(P₁ − P₂) = −2e(P₂ − I/2)`.
pub fn qubit_pure_mixed_decomposition(delta: &PerturbationOperator, tol: &Tolerances) -> Result<PureMixedDecomposition> {
    if delta.dim() != 2 {
        return Err(Error::DimensionMismatch(delta.dim(), 2));
    }
    let spec = delta.op().spectral()?;
    let e = spec.max();
    let pure = HermitianOperator::projector(&spec.vector(1));
    let mixed = HermitianOperator::identity(2).scaled(0.5);
    PureMixedDecomposition::build(delta, -2.0 * e, pure, mixed, tol)
}

/// Qutrit decomposition with eigenvalues `e₁ ≥ e₂ ≥ 0 > e₃` (after flipping the sign of `Δ` if
/// two eigenvalues are negative). Full rank: `Δ = −(e₁+e₂)(P₃ − (e₁P₁ + e₂P₂)/(e₁+e₂))`.
/// Rank two: the qubit identity on `span{φ₁, φ₃}`, written so that the mixed part keeps rank two.
pub fn qutrit_pure_mixed_decomposition(delta: &PerturbationOperator, tol: &Tolerances) -> Result<PureMixedDecomposition> {
    if delta.dim() != 3 {
        return Err(Error::DimensionMismatch(delta.dim(), 3));
    }
    let spec0 = delta.op().spectral()?;
    let (sign, spec) = if spec0.eigenvalues()[1] < 0.0 {
        (-1.0, delta.op().scaled(-1.0).spectral()?)
    } else {
        (1.0, spec0)
    };
    let e = spec.eigenvalues();
    let (e1, e2, e3) = (e[0], e[1], e[2]);
    let p = |j: usize| HermitianOperator::projector(&spec.vector(j));
    let upper = &p(0).scaled(e1) + &p(1).scaled(e2);
    let kappa = if rank_of_spectrum(e, tol) == 2 {
        2.0 * e3.abs()
    } else {
        e1 + e2
    };
    let mixed = if rank_of_spectrum(e, tol) == 2 {
        &p(2).scaled(0.5) + &upper.scaled(1.0 / kappa)
    } else {
        upper.scaled(1.0 / kappa)
    };
    PureMixedDecomposition::build(delta, -sign * kappa, p(2), mixed, tol)
}

/// `P₁ + P₂ − P₃ − P₄` in the computational basis.
pub fn purity_witness(d: usize, tol: &Tolerances) -> Result<PerturbationOperator> {
    if d < 4 {
        return Err(Error::InvalidParameter(format!(
            "the purity witness needs d ≥ 4, got {d}"
        )));
    }
    let mut diag = vec![0.0; d];
    diag[..4].copy_from_slice(&[1.0, 1.0, -1.0, -1.0]);
    PerturbationOperator::new(HermitianOperator::from_real_diagonal(&diag), tol)
}

fn decompose(delta: &PerturbationOperator, tol: &Tolerances) -> Result<PureMixedDecomposition> {
    match delta.dim() {
        2 => qubit_pure_mixed_decomposition(delta, tol),
        3 => qutrit_pure_mixed_decomposition(delta, tol),
        d => Err(Error::InvalidParameter(format!("no pure/mixed decomposition for d = {d}"))),
    }
}

pub fn purity_analysis(d: usize, seed: u64, tol: &Tolerances) -> Result<CatalogVerdict> {
    check_dim(d)?;
    let mut params = Map::new();
    params.insert("d".into(), json!(d));
    let mut v = CatalogVerdict::new("purity", params, seed);

    if d <= 3 {
        let problem = purity_problem(d, tol)?;
        let parts: Vec<(PureMixedDecomposition, CrossingWitness)> = (0..EVIDENCE_DIRECTIONS)
            .into_par_iter()
            .map(|k| {
                let delta = Sampler::new(derive_seed(seed, k as u64)).perturbation(d, tol);
                let dec = decompose(&delta, tol)?;
                let w = dec.crossing(&delta);
                w.verify(&problem, tol)?;
                Ok((dec, w))
            })
            .collect::<Result<_>>()?;
        v.ic_required = true;
        for (dec, witness) in parts {
            v.evidence.push(Evidence::PureMixed(dec));
            v.evidence.push(Evidence::Crossing { witness });
        }
        return Ok(v);
    }

    let delta = purity_witness(d, tol)?;
    let (plus, minus) = delta.op().pos_neg_parts()?;
    let plus_rank = plus.rank_eps(tol)?;
    let minus_rank = minus.rank_eps(tol)?;
    let first = DensityOperator::from_diagonal(&padded(d, &[0.5, 0.5, 0.0, 0.0]), tol)?;
    let second = DensityOperator::from_diagonal(&padded(d, &[0.0, 0.0, 0.5, 0.5]), tol)?;
    let system = OperatorSystem::annihilating(d, &[delta.op().clone()], tol)?;
    let residual = system.project(&(first.op() - second.op()))?.hs_norm();
    if residual > tol.num || distinguishes(&system, &first, &second, tol)? {
        return Err(Error::Verification(
            "mixed pair is distinguished by the complement system".into(),
        ));
    }
    let (probes, crossings) = falsification_probes(&delta, 1, VERDICT_PROBE_STATES, seed, tol)?;
    if crossings > 0 {
        return Err(Error::Verification(format!(
            "purity witness crossed in {crossings} of {probes} probes"
        )));
    }
    v.witness = Some(delta);
    v.min_outcomes = Some(rank_outcome_bound(d, 1)?);
    v.evidence = vec![
        Evidence::RankMinimality {
            plus_rank,
            minus_rank,
            threshold: 1,
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

fn padded(d: usize, head: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[..head.len()].copy_from_slice(head);
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlmostPurityFunctional {
    /// `tr ϱ² ≤ ε` against `> ε`.
    Purity,
    /// `S(ϱ) ≥ ε` against `< ε`.
    Entropy,
}

pub fn almost_purity_analysis(
    d: usize,
    functional: AlmostPurityFunctional,
    eps: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<CatalogVerdict> {
    check_dim(d)?;
    let (f, level) = match functional {
        AlmostPurityFunctional::Purity => (Functional::Purity, eps),
        AlmostPurityFunctional::Entropy => (Functional::Entropy.negated(), -eps),
    };
    levelset_problem(&f, level, d, tol)?;
    let mut params = Map::new();
    params.insert("d".into(), json!(d));
    params.insert("eps".into(), json!(eps));
    params.insert("functional".into(), json!(functional));
    let mut v = CatalogVerdict::new("almost_purity", params, seed);
    v.ic_required = true;
    v.evidence = levelset_evidence(&f, level, d, EVIDENCE_DIRECTIONS, seed, tol)?;
    Ok(v)
}

/// Checks on sampled pairs `ϱ₁` (pure), `ϱ₂` that `ℛ` cannot separate, that `ℛ` cannot separate
/// `ϱ₁` from `½ϱ₁ + ½ϱ₂` either. Trials where no such pair turns up count as confirmed.
pub fn purity_problem_reduction_check(
    r: &OperatorSystem,
    n_trials: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<bool> {
    let d = r.dim();
    let comp = orthocomplement(r, tol);
    if comp.is_empty() {
        return Ok(true);
    }
    for trial in 0..n_trials {
        let mut s = Sampler::new(derive_seed(seed, trial as u64));
        for _ in 0..50 {
            let mut m = HermitianOperator::zeros(d);
            for c in &comp {
                m = &m + &c.op().scaled(s.gaussian());
            }
            let spec = m.spectral()?;
            let cut = tol.rank * spec.max().abs().max(spec.min().abs());
            let positives = spec.eigenvalues().iter().filter(|&&x| x > cut).count();
            let negatives = spec.eigenvalues().iter().filter(|&&x| x < -cut).count();
            // need a direction with a single positive eigenvalue, whose eigenvector is ϱ₁
            let (dir, top, vec) = if positives == 1 {
                (m.clone(), spec.max(), spec.vector(0))
            } else if negatives == 1 {
                (-&m, -spec.min(), spec.vector(d - 1))
            } else {
                continue;
            };
            let rho1 = DensityOperator::pure(&vec);
            let step = s.uniform(0.1, 1.0) / top;
            let rho2 = DensityOperator::new(rho1.op() - &dir.scaled(step), tol)?;
            if distinguishes(r, &rho1, &rho2, tol)? {
                return Err(Error::Verification(
                    "pair built from the complement is distinguished".into(),
                ));
            }
            let mid = rho1.mix(&rho2, 0.5);
            if distinguishes(r, &rho1, &mid, tol)? {
                return Ok(false);
            }
            break;
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{BoundKind, OutcomeBound};

    fn t() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn qubit_example() {
        let tol = t();
        let z = PerturbationOperator::new(HermitianOperator::pauli_z(), &tol).unwrap();
        let dec = qubit_pure_mixed_decomposition(&z, &tol).unwrap();
        assert!((dec.lambda + 2.0).abs() < 1e-14);
        assert!((dec.pure.op() - DensityOperator::basis_state(2, 1).op()).hs_norm() < 1e-14);
        assert_eq!(dec.mixed, DensityOperator::maximally_mixed(2));
    }

    #[test]
    fn random_decompositions() {
        let tol = t();
        let mut s = Sampler::new(8);
        for k in 0..2000 {
            let d = 2 + k % 2;
            let delta = s.perturbation(d, &tol);
            let dec = decompose(&delta, &tol).unwrap();
            assert!(dec.residual <= tol.num * delta.op().hs_norm());
            assert_eq!(dec.pure.rank(&tol).unwrap(), 1);
            assert!(dec.mixed.rank(&tol).unwrap() >= 2);
        }
    }

    #[test]
    fn qutrit_rank_two_and_sign_flip() {
        let tol = t();
        for diag in [[1.0, 0.0, -1.0], [0.5, 0.0, -0.5], [1.0, -0.5, -0.5], [-1.0, 0.0, 1.0]] {
            let delta = PerturbationOperator::new(HermitianOperator::from_real_diagonal(&diag), &tol).unwrap();
            let dec = qutrit_pure_mixed_decomposition(&delta, &tol).unwrap();
            assert!(dec.mixed.rank(&tol).unwrap() >= 2, "{diag:?}");
            assert_eq!(dec.pure.rank(&tol).unwrap(), 1);
        }
    }

    #[test]
    fn verdicts() {
        let tol = t();
        for d in [2, 3] {
            let v = purity_analysis(d, 3, &tol).unwrap();
            assert!(v.ic_required);
            assert_eq!(v.crossings().count(), EVIDENCE_DIRECTIONS);
        }
        let v = purity_analysis(4, 3, &tol).unwrap();
        assert!(!v.ic_required);
        assert_eq!(v.min_outcomes, Some(OutcomeBound { value: 14, kind: BoundKind::Upper }));
        match &v.evidence[0] {
            Evidence::RankMinimality { plus_rank, minus_rank, .. } => assert_eq!((*plus_rank, *minus_rank), (2, 2)),
            e => panic!("unexpected evidence {e:?}"),
        }
        match &v.evidence[1] {
            Evidence::IndistinguishablePair { projection_residual, .. } => assert!(*projection_residual <= 1e-10),
            e => panic!("unexpected evidence {e:?}"),
        }
        assert!(purity_witness(3, &tol).is_err());
    }

    #[test]
    fn almost_purity() {
        let tol = t();
        let v = almost_purity_analysis(3, AlmostPurityFunctional::Purity, 0.6, 1, &tol).unwrap();
        assert!(v.ic_required);
        assert_eq!(v.crossings().count(), EVIDENCE_DIRECTIONS);
        assert!(almost_purity_analysis(2, AlmostPurityFunctional::Entropy, 0.5, 1, &tol).unwrap().ic_required);
        assert!(almost_purity_analysis(3, AlmostPurityFunctional::Purity, 1.0, 1, &tol).is_err());
        assert!(almost_purity_analysis(3, AlmostPurityFunctional::Purity, 1.0 / 3.0, 1, &tol).is_err());
        assert!(almost_purity_analysis(2, AlmostPurityFunctional::Entropy, 0.0, 1, &tol).is_err());
    }

    #[test]
    fn reduction_check() {
        let tol = t();
        let z = OperatorSystem::from_generators(2, &[HermitianOperator::pauli_z()], &tol).unwrap();
        assert!(purity_problem_reduction_check(&z, 50, 1, &tol).unwrap());
        assert!(purity_problem_reduction_check(&OperatorSystem::full(3), 10, 1, &tol).unwrap());
        let mut s = Sampler::new(2);
        let gens: Vec<_> = (0..4).map(|_| s.hermitian(3)).collect();
        let r = OperatorSystem::from_generators(3, &gens, &tol).unwrap();
        assert!(purity_problem_reduction_check(&r, 50, 2, &tol).unwrap());
    }
}
