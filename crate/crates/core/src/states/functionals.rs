use nalgebra::{DMatrix, DVector};

use super::{bloch::state_to_bloch, DensityOperator};
use crate::error::{Error, Result};
use crate::opspace::{rank_of_spectrum, SpectralDecomposition, Tolerances, C64};

fn same_dim(a: &DensityOperator, b: &DensityOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// Uhlmann fidelity `tr √(√σ ϱ √σ)`, in `[0, 1]`.
///
/// Evaluated on the support of whichever argument has the smaller rank: with `σ = V M V†` on its
/// support, the nonzero spectrum of `√σ ϱ √σ` is that of `√M (V†ϱV) √M`. Directions `Δ` with
/// `V†ΔV = 0` therefore leave the value bit-for-bit unchanged up to round-off in `V†ϱV`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator, tol: &Tolerances) -> Result<f64> {
    same_dim(rho, sigma)?;
    let sr = rho.op().spectral()?;
    let ss = sigma.op().spectral()?;
    let rank_r = rank_of_spectrum(sr.eigenvalues(), tol);
    let rank_s = rank_of_spectrum(ss.eigenvalues(), tol);
    let (reference, k, other) = if rank_r < rank_s {
        (&sr, rank_r, sigma)
    } else {
        (&ss, rank_s, rho)
    };
    let v = reference.columns(0..k);
    let inner = other.op().compress(&v);
    let root = DVector::from_iterator(
        k,
        reference.eigenvalues()[..k]
            .iter()
            .map(|x| C64::new(x.max(0.0).sqrt(), 0.0)),
    );
    let root = DMatrix::from_diagonal(&root);
    let m = &root * inner * &root;
    let spec = SpectralDecomposition::of_matrix(&crate::opspace::adjoint_symmetrize(&m))?;
    let f: f64 = spec.eigenvalues().iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// `tr ϱ²`, in `[1/d, 1]`.
pub fn purity(rho: &DensityOperator) -> f64 {
    rho.op().hs_norm().powi(2)
}

/// `−tr ϱ log₂ ϱ` with `0 log 0 = 0`, in `[0, log₂ d]`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let s = rho.op().spectral()?;
    let h: f64 = s
        .eigenvalues()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum();
    Ok(h.max(0.0))
}

/// `‖ϱ − σ‖₁`; orthogonal pure states are at distance 2.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    same_dim(rho, sigma)?;
    (rho.op() - sigma.op()).trace_norm()
}

/// `‖ϱ − σ‖₂`.
pub fn hs_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    same_dim(rho, sigma)?;
    Ok((rho.op() - sigma.op()).hs_norm())
}

/// Real-valued state functionals whose level sets define membership problems.
#[derive(Clone, Debug)]
pub enum Functional {
    Purity,
    Entropy,
    HsDistanceSquared(DensityOperator),
    /// Qubit only.
    TraceDistanceSquared(DensityOperator),
    Fidelity(DensityOperator),
    Negated(Box<Functional>),
}

/// Attained minimum and maximum of a functional over the state space.
#[derive(Clone, Debug)]
pub struct Extremes {
    pub argmin: DensityOperator,
    pub min: f64,
    pub argmax: DensityOperator,
    pub max: f64,
}

impl Functional {
    pub fn eval(&self, rho: &DensityOperator, tol: &Tolerances) -> Result<f64> {
        match self {
            Functional::Purity => Ok(purity(rho)),
            Functional::Entropy => von_neumann_entropy(rho),
            Functional::HsDistanceSquared(s) => Ok(hs_distance(rho, s)?.powi(2)),
            Functional::TraceDistanceSquared(s) => Ok(trace_distance(rho, s)?.powi(2)),
            Functional::Fidelity(s) => fidelity(rho, s, tol),
            Functional::Negated(f) => Ok(-f.eval(rho, tol)?),
        }
    }

    pub fn negated(self) -> Functional {
        match self {
            Functional::Negated(f) => *f,
            f => Functional::Negated(Box::new(f)),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Functional::Purity => "purity".into(),
            Functional::Entropy => "entropy".into(),
            Functional::HsDistanceSquared(_) => "hs_distance_squared".into(),
            Functional::TraceDistanceSquared(_) => "trace_distance_squared".into(),
            Functional::Fidelity(_) => "fidelity".into(),
            Functional::Negated(f) => format!("-{}", f.name()),
        }
    }

    fn reference(&self) -> Option<&DensityOperator> {
        match self {
            Functional::HsDistanceSquared(s)
            | Functional::TraceDistanceSquared(s)
            | Functional::Fidelity(s) => Some(s),
            Functional::Negated(f) => f.reference(),
            _ => None,
        }
    }

    /// Closed-form extremes on the `d`-level state space.
    pub fn extremes(&self, d: usize, tol: &Tolerances) -> Result<Extremes> {
        if let Some(s) = self.reference() {
            if s.dim() != d {
                return Err(Error::DimensionMismatch(d, s.dim()));
            }
        }
        let pure0 = || DensityOperator::basis_state(d, 0);
        let mixed = || DensityOperator::maximally_mixed(d);
        // pure state on the eigenvector of σ's smallest eigenvalue
        let farthest = |s: &DensityOperator| -> Result<(DensityOperator, f64)> {
            let spec = s.op().spectral()?;
            Ok((DensityOperator::pure(&spec.vector(d - 1)), spec.min().max(0.0)))
        };
        Ok(match self {
            Functional::Purity => Extremes {
                argmin: mixed(),
                min: 1.0 / d as f64,
                argmax: pure0(),
                max: 1.0,
            },
            Functional::Entropy => Extremes {
                argmin: pure0(),
                min: 0.0,
                argmax: mixed(),
                max: (d as f64).log2(),
            },
            Functional::HsDistanceSquared(s) => {
                let (far, mu) = farthest(s)?;
                Extremes {
                    argmin: s.clone(),
                    min: 0.0,
                    argmax: far,
                    max: 1.0 - 2.0 * mu + purity(s),
                }
            }
            Functional::TraceDistanceSquared(s) => {
                if d != 2 {
                    return Err(Error::InvalidParameter(
                        "trace-distance extremes are only available for qubits".into(),
                    ));
                }
                let r = state_to_bloch(s, tol)?;
                let (far, _) = farthest(s)?;
                Extremes {
                    argmin: s.clone(),
                    min: 0.0,
                    argmax: far,
                    max: (1.0 + r.norm()).powi(2),
                }
            }
            Functional::Fidelity(s) => {
                let (far, mu) = farthest(s)?;
                Extremes {
                    argmin: far,
                    min: mu.sqrt(),
                    argmax: s.clone(),
                    max: 1.0,
                }
            }
            Functional::Negated(f) => {
                let e = f.extremes(d, tol)?;
                Extremes {
                    argmin: e.argmax,
                    min: -e.max,
                    argmax: e.argmin,
                    max: -e.min,
                }
            }
        })
    }
}
