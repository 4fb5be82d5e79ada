//! Analytic verdicts for the standard membership problems, with the witnesses, measurements and
//! outcome bounds that back them.

mod distance;
mod exact_id;
mod fidelity;
pub mod problems;
mod purity;
mod rank;
pub mod spec;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

pub use distance::{hs_ball_analysis, hs_ball_max_radius, trace_ball_qubit_analysis};
pub use exact_id::{
    exact_id_analysis, exact_id_lowerbound_space, exact_id_povm, exact_id_witness,
    LowerBoundSpace, SegmentDecomposition,
};
pub use fidelity::{fidelity_analysis, fidelity_blind_subspace};
pub use purity::{
    almost_purity_analysis, purity_analysis, purity_problem_reduction_check, purity_witness,
    qubit_pure_mixed_decomposition, qutrit_pure_mixed_decomposition, AlmostPurityFunctional,
    PureMixedDecomposition,
};
pub(crate) use fidelity::blind_invariance_deviation;
pub use rank::{
    falsification_probes, rank_crossing_witness, rank_indistinguishability_lift, rank_outcome_bound,
    rank_threshold_analysis, rank_witness_direction, PROBES_PER_STATE,
};
pub use spec::{analyze, build_problem, CatalogProblem, ProblemSpec};

use crate::error::{Error, Result};
use crate::meas::Povm;
use crate::membership::{levelset_ic_check, CrossingWitness, SolvabilityVerdict};
use crate::opspace::Tolerances;
use crate::states::sampling::derive_seed;
use crate::states::{DensityOperator, FeasibleInterval, Functional, PerturbationOperator, Sampler};

/// Number of sampled directions backing an analytic IC-required verdict.
pub const EVIDENCE_DIRECTIONS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundKind {
    Exact,
    Lower,
    Upper,
    /// An upper bound that equals `d²`, i.e. says nothing beyond informational completeness.
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OutcomeBound {
    pub value: usize,
    pub kind: BoundKind,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    /// `Δ` leaves the state space in both directions at once.
    NegativeMinor {
        delta: PerturbationOperator,
        interval: FeasibleInterval,
    },
    Povm {
        outcomes: usize,
        povm: Povm,
    },
    LowerBoundSpace(LowerBoundSpace),
    Crossing {
        witness: CrossingWitness,
    },
    BlindSubspace {
        size: usize,
        samples: usize,
        max_fidelity_change: f64,
    },
    PureMixed(PureMixedDecomposition),
    IndistinguishablePair {
        first: DensityOperator,
        second: DensityOperator,
        projection_residual: f64,
    },
    RankMinimality {
        plus_rank: usize,
        minus_rank: usize,
        threshold: usize,
    },
    Falsification {
        probes: usize,
        crossings: usize,
    },
    Falsifier {
        verdict: SolvabilityVerdict,
    },
    Delegated {
        to: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogVerdict {
    pub problem: String,
    pub params: Map<String, Value>,
    pub ic_required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<PerturbationOperator>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_outcomes: Option<OutcomeBound>,
    pub evidence: Vec<Evidence>,
    pub seed: u64,
}

impl CatalogVerdict {
    fn new(problem: &str, params: Map<String, Value>, seed: u64) -> Self {
        Self {
            problem: problem.to_string(),
            params,
            ic_required: false,
            witness: None,
            min_outcomes: None,
            evidence: Vec::new(),
            seed,
        }
    }

    /// A verdict that needs no IC measurement has to name the direction it gives up.
    pub fn check(&self) -> Result<()> {
        if !self.ic_required && self.witness.is_none() {
            return Err(Error::Verification(format!(
                "{}: non-IC verdict without a witness direction",
                self.problem
            )));
        }
        Ok(())
    }

    /// Crossing witnesses carried as evidence.
    pub fn crossings(&self) -> impl Iterator<Item = &CrossingWitness> {
        self.evidence.iter().filter_map(|e| match e {
            Evidence::Crossing { witness } => Some(witness),
            _ => None,
        })
    }
}

pub(crate) fn state_json(rho: &DensityOperator) -> Value {
    serde_json::to_value(rho).expect("operators serialize")
}

/// `n` seeded random directions, each answered by a level-set crossing.
pub(crate) fn levelset_evidence(
    f: &Functional,
    level: f64,
    d: usize,
    n: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<Evidence>> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            let delta = Sampler::new(derive_seed(seed, k as u64)).perturbation(d, tol);
            levelset_ic_check(f, level, &delta, tol).map(|witness| Evidence::Crossing { witness })
        })
        .collect()
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { got: d, min: 2 });
    }
    Ok(())
}
