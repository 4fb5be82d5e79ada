//! Membership problems behind the catalog entries.

use std::sync::Arc;

use super::check_dim;
use crate::error::{Error, Result};
use crate::membership::{levelset_problem, Classifier, MembershipProblem};
use crate::opspace::Tolerances;
use crate::states::{DensityOperator, Functional};

/// `{σ}` against everything else; states within `η_num` of `σ` in HS norm count as `σ`.
pub fn exact_id_problem(sigma: &DensityOperator, tol: &Tolerances) -> Result<MembershipProblem> {
    let s = sigma.clone();
    let eps = tol.num;
    let classify: Classifier =
        Arc::new(move |rho: &DensityOperator| usize::from((rho.op() - s.op()).hs_norm() > eps));
    let far = Functional::HsDistanceSquared(sigma.clone()).extremes(sigma.dim(), tol)?.argmax;
    MembershipProblem::new(
        "exact_id",
        sigma.dim(),
        vec!["sigma".into(), "rest".into()],
        vec![sigma.clone(), far],
        classify,
    )
}

/// `‖ϱ − σ‖₂ ≤ ε`.
pub fn hs_ball_problem(sigma: &DensityOperator, eps: f64, tol: &Tolerances) -> Result<MembershipProblem> {
    levelset_problem(&Functional::HsDistanceSquared(sigma.clone()), eps * eps, sigma.dim(), tol)
}

/// `‖ϱ − σ‖₁ ≤ ε` for qubits.
pub fn trace_ball_problem(sigma: &DensityOperator, eps: f64, tol: &Tolerances) -> Result<MembershipProblem> {
    if sigma.dim() != 2 {
        return Err(Error::InvalidParameter("trace-ball problem is defined for d = 2 only".into()));
    }
    levelset_problem(&Functional::TraceDistanceSquared(sigma.clone()), eps * eps, 2, tol)
}

/// `F(ϱ, σ) ≥ ε` (sublevel of `−F`) against `F < ε`.
pub fn fidelity_problem(sigma: &DensityOperator, eps: f64, tol: &Tolerances) -> Result<MembershipProblem> {
    levelset_problem(&Functional::Fidelity(sigma.clone()).negated(), -eps, sigma.dim(), tol)
}

/// Pure states against mixed states.
pub fn purity_problem(d: usize, tol: &Tolerances) -> Result<MembershipProblem> {
    check_dim(d)?;
    let t = *tol;
    let classify: Classifier =
        Arc::new(move |rho: &DensityOperator| usize::from(rho.rank(&t).map_or(true, |r| r != 1)));
    MembershipProblem::new(
        "purity",
        d,
        vec!["pure".into(), "mixed".into()],
        vec![DensityOperator::basis_state(d, 0), DensityOperator::maximally_mixed(d)],
        classify,
    )
}

/// `rank ϱ ≤ r` against `rank ϱ > r`, ranks decided by `η_rank`.
pub fn rank_problem(d: usize, r: usize, tol: &Tolerances) -> Result<MembershipProblem> {
    check_dim(d)?;
    if r == 0 || r >= d {
        return Err(Error::InvalidRank { rank: r, dim: d });
    }
    let t = *tol;
    let classify: Classifier =
        Arc::new(move |rho: &DensityOperator| usize::from(rho.rank(&t).map_or(true, |k| k > r)));
    MembershipProblem::new(
        "rank_threshold",
        d,
        vec!["low_rank".into(), "high_rank".into()],
        vec![DensityOperator::basis_state(d, 0), DensityOperator::maximally_mixed(d)],
        classify,
    )
}
