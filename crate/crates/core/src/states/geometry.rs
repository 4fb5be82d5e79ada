use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DensityOperator, PerturbationOperator};
use crate::error::{Error, Result};
use crate::opspace::{
    adjoint_symmetrize, rank_of_spectrum, HermitianOperator, SpectralDecomposition, Tolerances,
    C64,
};

/// The closed set `{λ : ϱ + λΔ ⪰ 0}`; always contains 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl FeasibleInterval {
    /// True when both endpoints are within `eps` of zero, i.e. `Δ` leaves the state space at once.
    pub fn is_trivial(&self, eps: f64) -> bool {
        self.lo.abs() <= eps && self.hi.abs() <= eps
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.lo <= lambda && lambda <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `Δ = λ(ϱ₊ − ϱ₋)` with `λ = tr Δ₊` and `ϱ± = Δ±/λ`.
pub fn canonical_state_pair(
    delta: &PerturbationOperator,
    tol: &Tolerances,
) -> Result<(f64, DensityOperator, DensityOperator)> {
    let (plus, minus) = delta.op().pos_neg_parts()?;
    let lambda = plus.trace();
    if lambda <= 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    let rho_plus = DensityOperator::new(plus.scaled(1.0 / lambda), tol)?;
    let rho_minus = DensityOperator::new(minus.scaled(1.0 / lambda), tol)?;
    Ok((lambda, rho_plus, rho_minus))
}

/// Largest `λ ≥ 0` with `ϱ + λΔ ⪰ 0`.
///
/// Works in the eigenbasis of `ϱ`, splitting it into support `A ≻ 0` and kernel. Writing `Δ` in
/// blocks `[[D₁₁, D₁₂], [D₂₁, D₂₂]]`, a positive step is possible only if `D₂₂ ⪰ 0` and `D₁₂`
/// vanishes on the kernel of `D₂₂`; the step is then bounded by the Schur complement
/// `A + λ(D₁₁ − D₁₂ D₂₂⁺ D₂₁) ⪰ 0`.
fn max_step(rho_spec: &SpectralDecomposition, delta: &HermitianOperator, tol: &Tolerances) -> Result<f64> {
    let d = delta.dim();
    let eigs = rho_spec.eigenvalues();
    let r = rank_of_spectrum(eigs, tol);
    let dnorm = delta.hs_norm();
    let thr = tol.num * dnorm;
    // ‖ϱ + λΔ‖_op ≤ 1 and ‖ϱ‖_op ≤ 1 bound any feasible step.
    let cap = 2.0 / delta.op_norm()?;

    let rotated = delta.compress(rho_spec.eigenvectors());
    let d11 = rotated.view((0, 0), (r, r)).into_owned();

    let schur = if r == d {
        d11
    } else {
        let n2 = d - r;
        let d12 = rotated.view((0, r), (r, n2)).into_owned();
        let d22 = rotated.view((r, r), (n2, n2)).into_owned();
        let s22 = SpectralDecomposition::of_matrix(&d22)?;
        if s22.min() < -thr {
            return Ok(0.0);
        }
        let npos = s22.eigenvalues().iter().filter(|&&x| x > thr).count();
        let kernel = s22.columns(npos..n2);
        if (&d12 * &kernel).norm() > thr {
            return Ok(0.0);
        }
        let mut correction = DMatrix::<C64>::zeros(r, r);
        for j in 0..npos {
            let w: DVector<C64> = &d12 * s22.vector(j);
            correction += &w * w.adjoint() / C64::new(s22.eigenvalues()[j], 0.0);
        }
        d11 - correction
    };

    let inv_sqrt = DVector::from_iterator(r, eigs[..r].iter().map(|x| C64::new(1.0 / x.sqrt(), 0.0)));
    let scaled = DMatrix::from_diagonal(&inv_sqrt) * schur * DMatrix::from_diagonal(&inv_sqrt);
    let mu = SpectralDecomposition::of_matrix(&adjoint_symmetrize(&scaled))?.min();
    if mu >= 0.0 {
        return Ok(cap);
    }
    Ok((-1.0 / mu).min(cap))
}

/// The interval of `λ` for which `ϱ + λΔ` remains a state.
///
/// Kernel directions of `ϱ` are decided with the rank cutoff; a direction that couples the
/// support to the kernel without a compensating positive kernel block yields the degenerate
/// interval `{0}` exactly.
pub fn feasible_interval(
    rho: &DensityOperator,
    delta: &PerturbationOperator,
    tol: &Tolerances,
) -> Result<FeasibleInterval> {
    if rho.dim() != delta.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), delta.dim()));
    }
    let spec = rho.op().spectral()?;
    let hi = max_step(&spec, delta.op(), tol)?;
    let lo = -max_step(&spec, &-delta.op(), tol)?;
    Ok(FeasibleInterval { lo, hi })
}

/// Moves a full-rank state along `Δ` until it hits the boundary.
///
/// Returns `(ϱ₂, λ_min)` where `λ_min < 0` is the smallest eigenvalue of `ϱ^{-1/2} Δ ϱ^{-1/2}` and
/// `ϱ₂ = ϱ − Δ/λ_min`, so that `λ_min(ϱ − ϱ₂) = Δ` and `ϱ₂` has a zero eigenvalue.
pub fn push_to_boundary(
    rho: &DensityOperator,
    delta: &PerturbationOperator,
    tol: &Tolerances,
) -> Result<(DensityOperator, f64)> {
    let d = rho.dim();
    if delta.dim() != d {
        return Err(Error::DimensionMismatch(d, delta.dim()));
    }
    let spec = rho.op().spectral()?;
    let rank = rank_of_spectrum(spec.eigenvalues(), tol);
    if rank < d {
        return Err(Error::NotFullRank { rank, dim: d });
    }
    let inv_sqrt = spec.map(|x| 1.0 / x.sqrt());
    let congruent = delta.op().conjugate_by(&inv_sqrt);
    let lambda_min = SpectralDecomposition::of_matrix(&congruent)?.min();
    if lambda_min >= 0.0 {
        return Err(Error::Verification(format!(
            "congruent perturbation has no negative eigenvalue ({lambda_min:e})"
        )));
    }

    // One Newton step on t ↦ λ_min(ϱ + tΔ) removes the eigensolver error in the step length.
    let mut step = -1.0 / lambda_min;
    let pushed = rho.op() + &delta.op().scaled(step);
    let s2 = pushed.spectral()?;
    let slope = delta
        .op()
        .compress(&s2.columns(d - 1..d))[(0, 0)]
        .re;
    if slope < 0.0 {
        let refined = step - s2.min() / slope;
        if refined.is_finite() && refined > 0.0 {
            step = refined;
        }
    }
    let boundary = DensityOperator::new(rho.op() + &delta.op().scaled(step), tol)?;
    Ok((boundary, -1.0 / step))
}

/// Orthogonal projection onto the support of `ϱ`.
pub fn support_projection(rho: &DensityOperator, tol: &Tolerances) -> Result<HermitianOperator> {
    let spec = rho.op().spectral()?;
    let r = rank_of_spectrum(spec.eigenvalues(), tol);
    let v = spec.columns(0..r);
    Ok(HermitianOperator::symmetrized(&v * v.adjoint()))
}
