//! Distance balls around a reference state.

use serde_json::{json, Map};

use super::{exact_id_analysis, levelset_evidence, state_json, CatalogVerdict, Evidence, EVIDENCE_DIRECTIONS};
use crate::error::{Error, Result};
use crate::opspace::Tolerances;
use crate::states::{purity, state_to_bloch, DensityOperator, Functional};

/// Largest HS distance from `σ` to any state, attained at the eigenvector of its smallest
/// eigenvalue: `√(1 − 2μ_min + tr σ²)`.
pub fn hs_ball_max_radius(sigma: &DensityOperator) -> Result<f64> {
    let mu = sigma.op().min_eigenvalue()?.max(0.0);
    Ok((1.0 - 2.0 * mu + purity(sigma)).max(0.0).sqrt())
}

fn ball_analysis(
    name: &str,
    f: Functional,
    sigma: &DensityOperator,
    eps: f64,
    max: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<CatalogVerdict> {
    let d = sigma.dim();
    if eps == 0.0 {
        let mut v = exact_id_analysis(sigma, seed, tol)?;
        v.problem = name.to_string();
        v.params.insert("eps".into(), json!(eps));
        v.evidence.push(Evidence::Delegated { to: "exact_id".into() });
        return Ok(v);
    }
    if !(eps > 0.0 && eps < max) {
        return Err(Error::InvalidParameter(format!(
            "radius {eps} outside (0, {max}) for this reference state"
        )));
    }
    let mut params = Map::new();
    params.insert("d".into(), json!(d));
    params.insert("eps".into(), json!(eps));
    params.insert("max_radius".into(), json!(max));
    params.insert("sigma".into(), state_json(sigma));
    let mut v = CatalogVerdict::new(name, params, seed);
    v.ic_required = true;
    v.evidence = levelset_evidence(&f, eps * eps, d, EVIDENCE_DIRECTIONS, seed, tol)?;
    Ok(v)
}

/// `‖ϱ − σ‖₂ ≤ ε`: `‖·−σ‖₂²` is strictly mid-point convex, so every `0 < ε < max` needs an IC
/// measurement; `ε = 0` is exact identification.
pub fn hs_ball_analysis(sigma: &DensityOperator, eps: f64, seed: u64, tol: &Tolerances) -> Result<CatalogVerdict> {
    let max = hs_ball_max_radius(sigma)?;
    ball_analysis("hs_ball", Functional::HsDistanceSquared(sigma.clone()), sigma, eps, max, seed, tol)
}

/// Qubit `‖ϱ − σ‖₁ ≤ ε`; on the Bloch ball this is a Euclidean ball, radius at most `1 + ‖r_σ‖`.
pub fn trace_ball_qubit_analysis(
    sigma: &DensityOperator,
    eps: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<CatalogVerdict> {
    let max = 1.0 + state_to_bloch(sigma, tol)?.norm();
    ball_analysis(
        "trace_ball_qubit",
        Functional::TraceDistanceSquared(sigma.clone()),
        sigma,
        eps,
        max,
        seed,
        tol,
    )
}
