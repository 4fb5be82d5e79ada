//! POVMs and operator systems.
//!
//! An operator system is kept as an HS-orthonormal basis whose first element is `I/√d`, so
//! spans, projections and complements are all plain Gram–Schmidt arithmetic.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::opspace::{hermitian_basis, scale_of, HermitianOperator, Tolerances};
use crate::states::{DensityOperator, PerturbationOperator};

fn real_inner(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    a.matrix()
        .iter()
        .zip(b.matrix().iter())
        .map(|(x, y)| (x * y.conj()).re)
        .sum()
}

/// Removes the components along an orthonormal family, twice for stability.
fn residual(basis: &[HermitianOperator], a: &HermitianOperator) -> HermitianOperator {
    let mut r = a.clone();
    for _ in 0..2 {
        for b in basis {
            let c = real_inner(b, &r);
            if c != 0.0 {
                r = &r - &b.scaled(c);
            }
        }
    }
    r
}

fn check_dims(d: usize, ops: &[HermitianOperator]) -> Result<()> {
    match ops.iter().find(|a| a.dim() != d) {
        Some(a) => Err(Error::DimensionMismatch(d, a.dim())),
        None => Ok(()),
    }
}

/// Finite-outcome measurement `{E_j}` with `E_j ⪰ 0` and `Σ E_j = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    d: usize,
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>, tol: &Tolerances) -> Result<Self> {
        let d = elements
            .first()
            .ok_or_else(|| Error::Malformed("POVM has no elements".into()))?
            .dim();
        check_dims(d, &elements)?;
        let mut sum = HermitianOperator::zeros(d);
        for e in &elements {
            if !e.is_positive(tol)? {
                return Err(Error::NotPositive(e.min_eigenvalue()?));
            }
            sum = &sum + e;
        }
        let dev = (&sum - &HermitianOperator::identity(d)).hs_norm();
        if dev > tol.num {
            return Err(Error::InvalidParameter(format!(
                "POVM elements sum to identity only within {dev:e}"
            )));
        }
        Ok(Self { d, elements })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Outcome probabilities `tr(ϱ E_j)`.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        self.elements.iter().map(|e| rho.op().hs_inner(e)).collect()
    }
}

/// Real span of a set of Hermitian operators containing the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSystem {
    d: usize,
    basis: Vec<HermitianOperator>,
}

impl OperatorSystem {
    /// `span{I}`.
    pub fn trivial(d: usize) -> Self {
        Self {
            d,
            basis: vec![HermitianOperator::identity(d).scaled(1.0 / (d as f64).sqrt())],
        }
    }

    /// All Hermitian operators.
    pub fn full(d: usize) -> Self {
        let mut s = Self::trivial(d);
        s.extend_greedy(&hermitian_basis(d), d * d, &Tolerances::default());
        s
    }

    /// Gram–Schmidt over `I/√d, generators…`; a generator is dropped when its residual is
    /// within `η_rank` of zero relative to its own norm.
    pub fn from_generators(d: usize, generators: &[HermitianOperator], tol: &Tolerances) -> Result<Self> {
        check_dims(d, generators)?;
        let mut s = Self::trivial(d);
        for g in generators {
            s.push_if_independent(g, tol);
        }
        Ok(s)
    }

    fn push_if_independent(&mut self, g: &HermitianOperator, tol: &Tolerances) -> bool {
        if self.basis.len() == self.d * self.d {
            return false;
        }
        let r = residual(&self.basis, g);
        let n = r.hs_norm();
        if n <= tol.rank * scale_of(g.hs_norm()) {
            return false;
        }
        self.basis.push(r.scaled(1.0 / n));
        true
    }

    /// Repeatedly adds the candidate with the largest residual until `target` size is reached
    /// or nothing independent is left.
    fn extend_greedy(&mut self, candidates: &[HermitianOperator], target: usize, tol: &Tolerances) {
        while self.basis.len() < target {
            let best = candidates
                .iter()
                .map(|c| residual(&self.basis, c))
                .map(|r| (r.hs_norm(), r))
                .fold(None::<(f64, HermitianOperator)>, |acc, (n, r)| match acc {
                    Some((m, _)) if m >= n => acc,
                    _ => Some((n, r)),
                });
            match best {
                Some((n, r)) if n > tol.rank => self.basis.push(r.scaled(1.0 / n)),
                _ => break,
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[HermitianOperator] {
        &self.basis
    }

    /// HS-orthogonal projection onto the span.
    pub fn project(&self, a: &HermitianOperator) -> Result<HermitianOperator> {
        if a.dim() != self.d {
            return Err(Error::DimensionMismatch(self.d, a.dim()));
        }
        let mut p = HermitianOperator::zeros(self.d);
        for b in &self.basis {
            p = &p + &b.scaled(real_inner(b, a));
        }
        Ok(p)
    }

    /// `a` lies in the span within `η_num` relative to its norm.
    pub fn contains(&self, a: &HermitianOperator, tol: &Tolerances) -> Result<bool> {
        let r = a - &self.project(a)?;
        Ok(r.hs_norm() <= tol.num * scale_of(a.hs_norm()))
    }

    /// Every basis element of `self` lies in `other`.
    pub fn is_subspace_of(&self, other: &OperatorSystem, tol: &Tolerances) -> Result<bool> {
        for b in &self.basis {
            if !other.contains(b, tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn same_span(&self, other: &OperatorSystem, tol: &Tolerances) -> Result<bool> {
        Ok(self.size() == other.size() && self.is_subspace_of(other, tol)? && other.is_subspace_of(self, tol)?)
    }

    /// The system whose complement is `span(perps)`, i.e. the HS-orthocomplement of the
    /// given traceless directions.
    pub fn annihilating(d: usize, perps: &[HermitianOperator], tol: &Tolerances) -> Result<Self> {
        check_dims(d, perps)?;
        let mut blind = Self::trivial(d);
        for p in perps {
            blind.push_if_independent(p, tol);
        }
        let k = blind.size() - 1;
        let mut s = Self::trivial(d);
        let comp = orthocomplement_of(&blind, tol);
        for c in comp {
            s.basis.push(c.into_op());
        }
        debug_assert_eq!(s.size(), d * d - k);
        Ok(s)
    }
}

fn orthocomplement_of(r: &OperatorSystem, tol: &Tolerances) -> Vec<PerturbationOperator> {
    let d = r.d;
    let mut all = r.clone();
    all.extend_greedy(&hermitian_basis(d), d * d, tol);
    all.basis
        .into_iter()
        .skip(r.size())
        .map(PerturbationOperator::new_unchecked)
        .collect()
}

/// `span{E_j} ∪ {I}`.
pub fn operator_system_from_povm(e: &Povm, tol: &Tolerances) -> OperatorSystem {
    OperatorSystem::from_generators(e.d, &e.elements, tol).expect("POVM elements share a dimension")
}

/// HS-orthonormal basis of `ℛ^⊥`; all elements are traceless since `I ∈ ℛ`.
pub fn orthocomplement(r: &OperatorSystem, tol: &Tolerances) -> Vec<PerturbationOperator> {
    orthocomplement_of(r, tol)
}

pub fn is_informationally_complete(r: &OperatorSystem) -> bool {
    r.size() == r.d * r.d
}

/// Whether the measurement statistics of `ℛ` separate the two states. Equal states are not
/// distinguished.
pub fn distinguishes(
    r: &OperatorSystem,
    rho1: &DensityOperator,
    rho2: &DensityOperator,
    tol: &Tolerances,
) -> Result<bool> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch(rho1.dim(), rho2.dim()));
    }
    let diff = rho1.op() - rho2.op();
    let n = diff.hs_norm();
    if n == 0.0 {
        return Ok(false);
    }
    Ok(r.project(&diff)?.hs_norm() > tol.num * n)
}

/// POVM with exactly `size(ℛ)` outcomes spanning `ℛ`: `E_i = c(I + Â_i)` for the non-identity
/// basis elements rescaled to unit operator norm, `c = 1/(2(m − 1))`, and `E_m = I − Σ E_i`.
pub fn povm_from_operator_system(r: &OperatorSystem, tol: &Tolerances) -> Result<Povm> {
    let d = r.d;
    let m = r.size();
    let id = HermitianOperator::identity(d);
    if m == 1 {
        return Povm::new(vec![id], tol);
    }
    let c = 1.0 / (2.0 * (m - 1) as f64);
    let mut elements = Vec::with_capacity(m);
    let mut rest = id.clone();
    for b in &r.basis[1..] {
        let a = b.scaled(1.0 / b.op_norm()?);
        let e = (&id + &a).scaled(c);
        rest = &rest - &e;
        elements.push(e);
    }
    elements.push(rest);
    let povm = Povm::new(elements, tol)?;
    let back = operator_system_from_povm(&povm, tol);
    if !back.same_span(r, tol)? {
        return Err(Error::Verification(
            "synthesized POVM does not span the operator system".into(),
        ));
    }
    Ok(povm)
}

#[derive(Serialize)]
struct PovmOut<'a> {
    d: usize,
    elements: &'a [HermitianOperator],
}

#[derive(Deserialize)]
struct PovmIn {
    d: usize,
    elements: Vec<HermitianOperator>,
}

impl Serialize for Povm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PovmOut {
            d: self.d,
            elements: &self.elements,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PovmIn::deserialize(de)?;
        if raw.elements.iter().any(|e| e.dim() != raw.d) {
            return Err(D::Error::custom("element dimension disagrees with d"));
        }
        Povm::new(raw.elements, &Tolerances::default()).map_err(D::Error::custom)
    }
}

#[derive(Serialize)]
struct SystemOut<'a> {
    d: usize,
    basis: &'a [HermitianOperator],
}

/// Either an orthonormal `basis` (as written by this crate) or arbitrary `generators`.
#[derive(Deserialize)]
struct SystemIn {
    d: usize,
    basis: Option<Vec<HermitianOperator>>,
    generators: Option<Vec<HermitianOperator>>,
}

impl Serialize for OperatorSystem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SystemOut {
            d: self.d,
            basis: &self.basis,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorSystem {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = SystemIn::deserialize(de)?;
        let tol = Tolerances::default();
        match (raw.basis, raw.generators) {
            (Some(basis), None) => OperatorSystem::from_basis(raw.d, basis, &tol),
            (None, Some(gens)) => OperatorSystem::from_generators(raw.d, &gens, &tol),
            _ => Err(Error::Malformed(
                "operator system needs exactly one of \"basis\" or \"generators\"".into(),
            )),
        }
        .map_err(D::Error::custom)
    }
}

impl OperatorSystem {
    /// Accepts an already orthonormal basis starting with `I/√d` without re-orthogonalizing.
    pub fn from_basis(d: usize, basis: Vec<HermitianOperator>, tol: &Tolerances) -> Result<Self> {
        check_dims(d, &basis)?;
        if basis.is_empty() || basis.len() > d * d {
            return Err(Error::Malformed(format!(
                "basis size {} outside 1..={}",
                basis.len(),
                d * d
            )));
        }
        let unit = Self::trivial(d);
        if (&basis[0] - &unit.basis[0]).hs_norm() > tol.num {
            return Err(Error::Malformed("first basis element must be I/√d".into()));
        }
        for (j, a) in basis.iter().enumerate() {
            for b in &basis[..=j] {
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                if (real_inner(a, b) - want).abs() > tol.num {
                    return Err(Error::Malformed("basis is not HS-orthonormal".into()));
                }
            }
        }
        Ok(Self { d, basis })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspace::{gell_mann_basis, C64};
    use crate::states::Sampler;
    use nalgebra::DVector;

    fn t() -> Tolerances {
        Tolerances::default()
    }

    fn z_system() -> OperatorSystem {
        OperatorSystem::from_generators(2, &[HermitianOperator::pauli_z()], &t()).unwrap()
    }

    fn pauli_six() -> Povm {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let i = C64::new(0.0, 1.0);
        let v = |a: C64, b: C64| DVector::from_vec(vec![a, b]);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let vecs = [
            v(one * s, one * s),
            v(one * s, -one * s),
            v(one * s, i * s),
            v(one * s, -i * s),
            v(one, zero),
            v(zero, one),
        ];
        Povm::new(
            vecs.iter().map(|x| HermitianOperator::projector(x).scaled(1.0 / 3.0)).collect(),
            &t(),
        )
        .unwrap()
    }

    fn random_system(s: &mut Sampler, d: usize, k: usize) -> OperatorSystem {
        let gens: Vec<_> = (0..k).map(|_| s.hermitian(d)).collect();
        OperatorSystem::from_generators(d, &gens, &t()).unwrap()
    }

    #[test]
    fn span_examples() {
        let tol = t();
        let id = Povm::new(vec![HermitianOperator::identity(2)], &tol).unwrap();
        assert_eq!(operator_system_from_povm(&id, &tol).size(), 1);
        let comp = Povm::new(
            vec![
                HermitianOperator::from_real_diagonal(&[1.0, 0.0]),
                HermitianOperator::from_real_diagonal(&[0.0, 1.0]),
            ],
            &tol,
        )
        .unwrap();
        assert_eq!(operator_system_from_povm(&comp, &tol).size(), 2);
        let six = operator_system_from_povm(&pauli_six(), &tol);
        assert_eq!(six.size(), 4);
        assert!(is_informationally_complete(&six));
    }

    #[test]
    fn povm_validation() {
        let tol = t();
        assert!(Povm::new(vec![HermitianOperator::from_real_diagonal(&[1.0, 0.0])], &tol).is_err());
        assert!(Povm::new(
            vec![
                HermitianOperator::from_real_diagonal(&[1.5, 0.0]),
                HermitianOperator::from_real_diagonal(&[-0.5, 1.0]),
            ],
            &tol
        )
        .is_err());
        assert!(Povm::new(vec![], &tol).is_err());
    }

    #[test]
    fn orthocomplement_examples() {
        let tol = t();
        let c = orthocomplement(&OperatorSystem::trivial(2), &tol);
        assert_eq!(c.len(), 3);
        assert!(orthocomplement(&OperatorSystem::full(3), &tol).is_empty());
        let c = orthocomplement(&z_system(), &tol);
        assert_eq!(c.len(), 2);
        let xy = OperatorSystem::from_generators(
            2,
            &c.iter().map(|p| p.op().clone()).collect::<Vec<_>>(),
            &tol,
        )
        .unwrap();
        assert!(xy.contains(&HermitianOperator::pauli_x(), &tol).unwrap());
        assert!(xy.contains(&HermitianOperator::pauli_y(), &tol).unwrap());
        assert!(!xy.contains(&HermitianOperator::pauli_z(), &tol).unwrap());
    }

    #[test]
    fn dimension_counting_and_tracelessness() {
        let tol = t();
        let mut s = Sampler::new(4);
        for d in 2..=6 {
            for k in 0..=(d * d) {
                let r = random_system(&mut s, d, k.min(d * d - 1));
                let c = orthocomplement(&r, &tol);
                assert_eq!(r.size() + c.len(), d * d);
                for p in &c {
                    assert!(p.op().trace().abs() <= tol.num);
                    assert!(r.project(p.op()).unwrap().hs_norm() <= tol.num);
                }
            }
        }
    }

    #[test]
    fn ic_examples() {
        assert!(!is_informationally_complete(&OperatorSystem::trivial(3)));
        assert!(is_informationally_complete(&OperatorSystem::full(3)));
        let three = OperatorSystem::from_generators(
            2,
            &[HermitianOperator::pauli_x(), HermitianOperator::pauli_z()],
            &t(),
        )
        .unwrap();
        assert_eq!(three.size(), 3);
        assert!(!is_informationally_complete(&three));
    }

    #[test]
    fn distinguishes_examples() {
        let tol = t();
        let r = z_system();
        let a = DensityOperator::basis_state(2, 0);
        let b = DensityOperator::basis_state(2, 1);
        assert!(!distinguishes(&r, &a, &a, &tol).unwrap());
        assert!(distinguishes(&r, &a, &b, &tol).unwrap());
        let half_x = HermitianOperator::pauli_x().scaled(0.5);
        let id = HermitianOperator::identity(2);
        let p = DensityOperator::new((&id + &half_x).scaled(0.5), &tol).unwrap();
        let m = DensityOperator::new((&id - &half_x).scaled(0.5), &tol).unwrap();
        assert!(!distinguishes(&r, &p, &m, &tol).unwrap());
    }

    #[test]
    fn distinguishes_symmetric_and_monotone() {
        let tol = t();
        let mut s = Sampler::new(8);
        for i in 0..200 {
            let d = 2 + i % 3;
            let gens: Vec<_> = (0..(i % (d * d))).map(|_| s.hermitian(d)).collect();
            let small = OperatorSystem::from_generators(d, &gens[..gens.len() / 2], &tol).unwrap();
            let big = OperatorSystem::from_generators(d, &gens, &tol).unwrap();
            assert!(small.is_subspace_of(&big, &tol).unwrap());
            let a = s.state(d, 1 + i % d, &tol).unwrap();
            let b = s.state(d, d, &tol).unwrap();
            let ab = distinguishes(&small, &a, &b, &tol).unwrap();
            assert_eq!(ab, distinguishes(&small, &b, &a, &tol).unwrap());
            if ab {
                assert!(distinguishes(&big, &a, &b, &tol).unwrap());
            }
        }
    }

    #[test]
    fn synthesis_examples() {
        let tol = t();
        let p = povm_from_operator_system(&z_system(), &tol).unwrap();
        assert_eq!(p.len(), 2);
        let up = HermitianOperator::from_real_diagonal(&[1.0, 0.0]);
        let down = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        assert!((&p.elements()[0] - &up).hs_norm() < 1e-14);
        assert!((&p.elements()[1] - &down).hs_norm() < 1e-14);

        let full = povm_from_operator_system(&OperatorSystem::full(2), &tol).unwrap();
        assert_eq!(full.len(), 4);
        assert!(is_informationally_complete(&operator_system_from_povm(&full, &tol)));

        assert_eq!(povm_from_operator_system(&OperatorSystem::trivial(3), &tol).unwrap().len(), 1);
    }

    #[test]
    fn synthesis_round_trip() {
        let tol = t();
        let mut s = Sampler::new(21);
        for i in 0..150 {
            let d = 2 + i % 4;
            let r = random_system(&mut s, d, i % (d * d));
            let p = povm_from_operator_system(&r, &tol).unwrap();
            assert_eq!(p.len(), r.size());
            for e in p.elements() {
                assert!(e.min_eigenvalue().unwrap() >= -tol.pos);
            }
            assert!(operator_system_from_povm(&p, &tol).same_span(&r, &tol).unwrap());
        }
    }

    #[test]
    fn annihilating_has_requested_blind_space() {
        let tol = t();
        let ggm = gell_mann_basis(3);
        let r = OperatorSystem::annihilating(3, &ggm[..3], &tol).unwrap();
        assert_eq!(r.size(), 9 - 3);
        for g in &ggm[..3] {
            assert!(r.project(g).unwrap().hs_norm() < 1e-12);
        }
    }

    #[test]
    fn json_round_trips() {
        let tol = t();
        let mut s = Sampler::new(5);
        let r = random_system(&mut s, 3, 4);
        let text = serde_json::to_string(&r).unwrap();
        let back: OperatorSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);

        let p = povm_from_operator_system(&r, &tol).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: Povm = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);

        let gens = r#"{"d":2,"generators":[{"d":2,"re":[[1,0],[0,-1]],"im":[[0,0],[0,0]]}]}"#;
        let g: OperatorSystem = serde_json::from_str(gens).unwrap();
        assert!(g.same_span(&z_system(), &tol).unwrap());
        let bad = r#"{"d":2,"basis":[{"d":2,"re":[[1,0],[0,-1]],"im":[[0,0],[0,0]]}]}"#;
        assert!(serde_json::from_str::<OperatorSystem>(bad).is_err());
    }
}
