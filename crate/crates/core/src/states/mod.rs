//! State-space geometry.
//!
//! States are positive unit-trace operators; perturbations are nonzero traceless Hermitian
//! directions. The geometry helpers here answer "how far can a state move along a direction
//! before leaving the state space" and build the standard decompositions of a direction into
//! a difference of states.

mod bloch;
mod functionals;
mod geometry;
pub mod sampling;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bloch::{bloch_to_state, state_to_bloch, BlochVector};
pub use functionals::{
    fidelity, hs_distance, purity, trace_distance, von_neumann_entropy, Extremes, Functional,
};
pub use geometry::{
    canonical_state_pair, feasible_interval, push_to_boundary, support_projection,
    FeasibleInterval,
};
pub use sampling::{random_perturbation, random_pure, random_state, Sampler};

use crate::error::{Error, Result};
use crate::opspace::{positive_spectrum, HermitianOperator, OperatorJson, Tolerances, C64};

/// Positive operator with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let s = op.spectral()?;
        if !positive_spectrum(s.eigenvalues(), tol) {
            return Err(Error::NotPositive(s.min()));
        }
        let tr = op.trace();
        if (tr - 1.0).abs() > tol.num {
            return Err(Error::TraceNotUnit(tr));
        }
        Ok(Self { op })
    }

    /// For operators that are states by construction (convex mixtures, normalized projectors).
    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            op: HermitianOperator::identity(d).scaled(1.0 / d as f64),
        }
    }

    /// `|v⟩⟨v|` for a nonzero vector `v` (normalized internally).
    pub fn pure(v: &DVector<C64>) -> Self {
        Self {
            op: HermitianOperator::projector(v),
        }
    }

    /// `|k⟩⟨k|` in the computational basis.
    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut diag = vec![0.0; d];
        diag[k] = 1.0;
        Self {
            op: HermitianOperator::from_real_diagonal(&diag),
        }
    }

    pub fn from_diagonal(diag: &[f64], tol: &Tolerances) -> Result<Self> {
        if diag.len() < 2 {
            return Err(Error::DimensionTooSmall {
                got: diag.len(),
                min: 2,
            });
        }
        Self::new(HermitianOperator::from_real_diagonal(diag), tol)
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `t·self + (1 − t)·other` for `t ∈ [0, 1]`.
    pub fn mix(&self, other: &DensityOperator, t: f64) -> DensityOperator {
        assert!((0.0..=1.0).contains(&t), "mixing weight {t} outside [0, 1]");
        Self {
            op: &self.op.scaled(t) + &other.op.scaled(1.0 - t),
        }
    }

    pub fn rank(&self, tol: &Tolerances) -> Result<usize> {
        self.op.rank_eps(tol)
    }

    /// Interior points of the state space are exactly the full-rank states.
    pub fn is_full_rank(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.rank(tol)? == self.dim())
    }

    /// `ϱ + λΔ`, if that is still a state.
    pub fn perturbed(
        &self,
        lambda: f64,
        delta: &PerturbationOperator,
        tol: &Tolerances,
    ) -> Result<DensityOperator> {
        if delta.dim() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), delta.dim()));
        }
        Self::new(&self.op + &delta.op.scaled(lambda), tol)
    }
}

/// Nonzero traceless Hermitian operator, a direction within the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationOperator {
    op: HermitianOperator,
}

impl PerturbationOperator {
    pub fn new(op: HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let norm = op.hs_norm();
        if norm <= tol.num {
            return Err(Error::ZeroPerturbation);
        }
        let tr = op.trace();
        if tr.abs() > tol.num * norm {
            return Err(Error::NotTraceless(tr));
        }
        Ok(Self { op })
    }

    /// Removes the trace part `tr(A)/d · I` before validating.
    pub fn from_traceless_part(op: &HermitianOperator, tol: &Tolerances) -> Result<Self> {
        let d = op.dim();
        let shift = HermitianOperator::identity(d).scaled(op.trace() / d as f64);
        Self::new(op - &shift, tol)
    }

    pub(crate) fn new_unchecked(op: HermitianOperator) -> Self {
        Self { op }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn negated(&self) -> Self {
        Self { op: -&self.op }
    }

    /// Rescaled to unit Hilbert–Schmidt norm.
    pub fn normalized(&self) -> Self {
        Self {
            op: self.op.scaled(1.0 / self.op.hs_norm()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OperatorKind {
    State,
    Perturbation,
}

#[derive(Serialize)]
struct TaggedOut {
    kind: OperatorKind,
    #[serde(flatten)]
    op: OperatorJson,
}

/// Reader side: the `kind` tag is optional so plain operator JSON is also accepted.
#[derive(Deserialize)]
struct TaggedIn {
    kind: Option<OperatorKind>,
    #[serde(flatten)]
    op: OperatorJson,
}

impl Serialize for DensityOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TaggedOut {
            kind: OperatorKind::State,
            op: OperatorJson::from(&self.op),
        }
        .serialize(s)
    }
}

impl Serialize for PerturbationOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TaggedOut {
            kind: OperatorKind::Perturbation,
            op: OperatorJson::from(&self.op),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = TaggedIn::deserialize(d)?;
        if matches!(raw.kind, Some(OperatorKind::Perturbation)) {
            return Err(D::Error::custom("expected kind \"state\", found \"perturbation\""));
        }
        let tol = Tolerances::default();
        let op = raw.op.to_operator(&tol).map_err(D::Error::custom)?;
        DensityOperator::new(op, &tol).map_err(D::Error::custom)
    }
}

impl<'de> Deserialize<'de> for PerturbationOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = TaggedIn::deserialize(d)?;
        if matches!(raw.kind, Some(OperatorKind::State)) {
            return Err(D::Error::custom("expected kind \"perturbation\", found \"state\""));
        }
        let tol = Tolerances::default();
        let op = raw.op.to_operator(&tol).map_err(D::Error::custom)?;
        PerturbationOperator::new(op, &tol).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_predicates() {
        let t = Tolerances::default();
        assert!(DensityOperator::from_diagonal(&[0.75, 0.25], &t).is_ok());
        assert!(matches!(
            DensityOperator::from_diagonal(&[1.5, -0.5], &t),
            Err(Error::NotPositive(_))
        ));
        assert!(matches!(
            DensityOperator::from_diagonal(&[0.5, 0.6], &t),
            Err(Error::TraceNotUnit(_))
        ));
        assert!(matches!(
            PerturbationOperator::new(HermitianOperator::zeros(3), &t),
            Err(Error::ZeroPerturbation)
        ));
        assert!(matches!(
            PerturbationOperator::new(HermitianOperator::identity(2), &t),
            Err(Error::NotTraceless(_))
        ));
    }

    #[test]
    fn tagged_json() {
        let t = Tolerances::default();
        let rho = DensityOperator::from_diagonal(&[0.75, 0.25], &t).unwrap();
        let v = serde_json::to_value(&rho).unwrap();
        assert_eq!(v["kind"], "state");
        assert_eq!(v["d"], 2);
        let back: DensityOperator = serde_json::from_value(v.clone()).unwrap();
        assert_eq!(back, rho);
        assert!(serde_json::from_value::<PerturbationOperator>(v).is_err());

        let z = PerturbationOperator::new(HermitianOperator::pauli_z(), &t).unwrap();
        let v = serde_json::to_value(&z).unwrap();
        assert_eq!(v["kind"], "perturbation");
        assert_eq!(serde_json::from_value::<PerturbationOperator>(v).unwrap(), z);

        // untagged input is accepted
        let plain = r#"{"d":2,"re":[[1,0],[0,0]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<DensityOperator>(plain).is_ok());
    }
}
