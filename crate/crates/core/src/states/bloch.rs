use serde::{Deserialize, Serialize};

use super::DensityOperator;
use crate::error::{Error, Result};
use crate::opspace::{HermitianOperator, Tolerances};

/// Point `r` of the unit ball, labelling the qubit state `½(I + r·σ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub r: [f64; 3],
}

impl BlochVector {
    pub fn new(r: [f64; 3], tol: &Tolerances) -> Result<Self> {
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Malformed("non-finite Bloch component".into()));
        }
        let v = Self { r };
        if v.norm() > 1.0 + tol.num {
            return Err(Error::NotPositive(0.5 * (1.0 - v.norm())));
        }
        Ok(v)
    }

    pub(crate) fn from_components_unchecked(r: [f64; 3]) -> Self {
        Self { r }
    }

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        (0..3)
            .map(|i| (self.r[i] - other.r[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn bloch_to_state(r: &BlochVector) -> DensityOperator {
    let [x, y, z] = r.r;
    let op = HermitianOperator::identity(2)
        + HermitianOperator::pauli_x().scaled(x)
        + HermitianOperator::pauli_y().scaled(y)
        + HermitianOperator::pauli_z().scaled(z);
    DensityOperator::new_unchecked(op.scaled(0.5))
}

/// `r_i = tr(ϱ σ_i)`.
pub fn state_to_bloch(rho: &DensityOperator, tol: &Tolerances) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(rho.dim(), 2));
    }
    let c = |p: HermitianOperator| rho.op().hs_inner(&p);
    BlochVector::new(
        [
            c(HermitianOperator::pauli_x())?,
            c(HermitianOperator::pauli_y())?,
            c(HermitianOperator::pauli_z())?,
        ],
        tol,
    )
}
