//! Dense Hermitian operator algebra.
//!
//! [`HermitianOperator`] is the carrier for every state, perturbation and POVM element in the
//! crate. Construction symmetrizes its input and rejects anything whose anti-Hermitian part
//! exceeds `Tolerances::herm`. Spectral quantities go through [`SpectralDecomposition`], which
//! orders eigenvalues descending and fixes eigenvector phases so decompositions are reproducible.
//!
//! All tolerance checks are relative to `max(1, ‖A‖_op)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical slack used throughout the crate. All values are dimensionless and relative to
/// the operator-norm scale of whatever is being tested.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed anti-Hermitian deviation at construction.
    pub herm: f64,
    /// Eigensolver reconstruction slack.
    pub eig: f64,
    /// Positivity slack: `λ_min ≥ -pos · scale` counts as positive.
    pub pos: f64,
    /// Rank cutoff: eigenvalues with `|λ| ≤ rank · scale` count as zero.
    pub rank: f64,
    /// General comparison slack.
    pub num: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            eig: 1e-9,
            pos: 1e-10,
            rank: 1e-8,
            num: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.herm, self.eig, self.pos, self.rank, self.num];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParameter(
                "tolerances must be finite and strictly positive".into(),
            ));
        }
        if self.rank <= self.pos {
            return Err(Error::InvalidParameter(format!(
                "rank cutoff {} must exceed positivity slack {}",
                self.rank, self.pos
            )));
        }
        Ok(())
    }
}

/// Scale factor `max(1, norm)` used by every relative tolerance.
pub(crate) fn scale_of(norm: f64) -> f64 {
    norm.max(1.0)
}

/// `(M + M†) / 2`.
pub fn adjoint_symmetrize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in descending order.
///
/// Each eigenvector's first component with modulus above `1e-12` is made real and positive.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    /// Decomposes an arbitrary-size Hermitian matrix. Only the lower triangle is read.
    pub(crate) fn of_matrix(m: &DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
            .ok_or(Error::EigenFailure)?;
        if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenFailure);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let mut eigenvectors = DMatrix::<C64>::zeros(n, n);
        for (col, &j) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(j).into_owned();
            if let Some(lead) = v.iter().copied().find(|c| c.norm() > 1e-12) {
                let phase = lead.conj() / lead.norm();
                v *= phase;
            }
            eigenvectors.set_column(col, &v);
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, matching the order of [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn vector(&self, j: usize) -> DVector<C64> {
        self.eigenvectors.column(j).into_owned()
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Columns `range` of the eigenvector matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> DMatrix<C64> {
        self.eigenvectors
            .columns(range.start, range.end - range.start)
            .into_owned()
    }

    /// `Σ f(λⱼ) |φⱼ⟩⟨φⱼ|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        self.map(|x| x)
    }
}

/// Dense `d × d` Hermitian matrix, `d ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<C64>,
}

impl HermitianOperator {
    /// Validates and symmetrizes `m`.
    pub fn new(m: DMatrix<C64>, tol: &Tolerances) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Malformed(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        if d < 2 {
            return Err(Error::DimensionTooSmall { got: d, min: 2 });
        }
        if m.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Malformed("non-finite entry".into()));
        }
        let size = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut dev: f64 = 0.0;
        for j in 0..d {
            for k in 0..=j {
                dev = dev.max((m[(j, k)] - m[(k, j)].conj()).norm());
            }
        }
        if dev > tol.herm * scale_of(size) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// Internal constructor for matrices that are Hermitian up to round-off.
    pub(crate) fn symmetrized(m: DMatrix<C64>) -> Self {
        debug_assert!(m.is_square() && m.nrows() >= 2);
        Self {
            m: adjoint_symmetrize(&m),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self {
            m: DMatrix::from_diagonal(&v),
        }
    }

    /// `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn projector(v: &DVector<C64>) -> Self {
        let n = v.norm_squared();
        Self::symmetrized(v * v.adjoint() / C64::new(n, 0.0))
    }

    /// `|u⟩⟨v| + |v⟩⟨u|`.
    pub fn symmetric_outer(u: &DVector<C64>, v: &DVector<C64>) -> Self {
        Self::symmetrized(u * v.adjoint() + v * u.adjoint())
    }

    pub fn pauli_x() -> Self {
        Self {
            m: DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        }
    }

    pub fn pauli_y() -> Self {
        let i = C64::new(0.0, 1.0);
        Self {
            m: DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            m: &self.m * C64::new(s, 0.0),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Hilbert–Schmidt inner product `tr(AB)`.
    pub fn hs_inner(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum())
    }

    /// Schatten-2 norm.
    pub fn hs_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        SpectralDecomposition::of_matrix(&self.m)
    }

    /// Schatten-1 norm.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.spectral()?.eigenvalues().iter().map(|x| x.abs()).sum())
    }

    /// Largest `|λ|`.
    pub fn op_norm(&self) -> Result<f64> {
        let s = self.spectral()?;
        Ok(s.max().abs().max(s.min().abs()))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectral()?.min())
    }

    /// `(Δ₊, Δ₋)` with `Δ = Δ₊ − Δ₋`, both positive and with orthogonal supports.
    pub fn pos_neg_parts(&self) -> Result<(Self, Self)> {
        let s = self.spectral()?;
        Ok((
            Self::symmetrized(s.map(|x| x.max(0.0))),
            Self::symmetrized(s.map(|x| (-x).max(0.0))),
        ))
    }

    /// `|A| = Δ₊ + Δ₋`.
    pub fn abs(&self) -> Result<Self> {
        let s = self.spectral()?;
        Ok(Self::symmetrized(s.map(f64::abs)))
    }

    /// Number of eigenvalues with `|λ| > η_rank · max(1, ‖A‖_op)`.
    pub fn rank_eps(&self, tol: &Tolerances) -> Result<usize> {
        Ok(rank_of_spectrum(self.spectral()?.eigenvalues(), tol))
    }

    /// `λ_min ≥ −η_pos · max(1, ‖A‖_op)`.
    pub fn is_positive(&self, tol: &Tolerances) -> Result<bool> {
        Ok(positive_spectrum(self.spectral()?.eigenvalues(), tol))
    }

    /// Square root of a positive operator. Eigenvalues inside the positivity slack are clamped to zero.
    pub fn matrix_sqrt(&self, tol: &Tolerances) -> Result<Self> {
        let s = self.spectral()?;
        if !positive_spectrum(s.eigenvalues(), tol) {
            return Err(Error::NotPositive(s.min()));
        }
        Ok(Self::symmetrized(s.map(|x| x.max(0.0).sqrt())))
    }

    /// `f(A)` through the spectral decomposition.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Ok(Self::symmetrized(self.spectral()?.map(f)))
    }

    /// `B A B†` as a raw matrix; `B` may be rectangular.
    pub fn conjugate_by(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        adjoint_symmetrize(&(b * &self.m * b.adjoint()))
    }

    /// `V† A V` for a `d × k` isometry `V`.
    pub fn compress(&self, v: &DMatrix<C64>) -> DMatrix<C64> {
        adjoint_symmetrize(&(v.adjoint() * &self.m * v))
    }
}

/// HS-orthonormal basis of the `d²`-dimensional real space of Hermitian matrices: the
/// diagonal units `E_kk`, then `(E_jk + E_kj)/√2` and `i(E_jk − E_kj)/√2` for `j < k`.
pub fn hermitian_basis(d: usize) -> Vec<HermitianOperator> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut m = DMatrix::zeros(d, d);
        m[(k, k)] = ONE;
        out.push(HermitianOperator { m });
    }
    for j in 0..d {
        for k in j + 1..d {
            let mut re = DMatrix::zeros(d, d);
            re[(j, k)] = C64::new(s, 0.0);
            re[(k, j)] = C64::new(s, 0.0);
            out.push(HermitianOperator { m: re });
            let mut im = DMatrix::zeros(d, d);
            im[(j, k)] = C64::new(0.0, s);
            im[(k, j)] = C64::new(0.0, -s);
            out.push(HermitianOperator { m: im });
        }
    }
    out
}

/// Generalized Gell-Mann matrices scaled to unit HS norm: symmetric and antisymmetric
/// off-diagonal pairs first, then the `d − 1` diagonal ones. Traceless, `d² − 1` elements.
pub fn gell_mann_basis(d: usize) -> Vec<HermitianOperator> {
    let mut out: Vec<HermitianOperator> = hermitian_basis(d).into_iter().skip(d).collect();
    for l in 1..d {
        let mut diag = vec![0.0; d];
        let norm = ((l * (l + 1)) as f64).sqrt();
        for x in diag.iter_mut().take(l) {
            *x = 1.0 / norm;
        }
        diag[l] = -(l as f64) / norm;
        out.push(HermitianOperator::from_real_diagonal(&diag));
    }
    out
}

pub(crate) fn spectrum_scale(eigs: &[f64]) -> f64 {
    scale_of(eigs.iter().fold(0.0_f64, |a, x| a.max(x.abs())))
}

pub(crate) fn rank_of_spectrum(eigs: &[f64], tol: &Tolerances) -> usize {
    let cut = tol.rank * spectrum_scale(eigs);
    eigs.iter().filter(|x| x.abs() > cut).count()
}

pub(crate) fn positive_spectrum(eigs: &[f64], tol: &Tolerances) -> bool {
    let min = eigs.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -tol.pos * spectrum_scale(eigs)
}

impl Add<&HermitianOperator> for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl Sub<&HermitianOperator> for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: &HermitianOperator) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: HermitianOperator) -> HermitianOperator {
        &self + &rhs
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: HermitianOperator) -> HermitianOperator {
        &self - &rhs
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        HermitianOperator { m: -&self.m }
    }
}

impl Neg for HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        -&self
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, s: f64) -> HermitianOperator {
        self.scaled(s)
    }
}

impl Mul<f64> for HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, s: f64) -> HermitianOperator {
        self.scaled(s)
    }
}

/// Wire format `{"d": int, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub d: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&HermitianOperator> for OperatorJson {
    fn from(a: &HermitianOperator) -> Self {
        let d = a.dim();
        let row = |f: fn(&C64) -> f64, j: usize| (0..d).map(|k| f(&a.m[(j, k)])).collect();
        Self {
            d,
            re: (0..d).map(|j| row(|c| c.re, j)).collect(),
            im: (0..d).map(|j| row(|c| c.im, j)).collect(),
        }
    }
}

impl OperatorJson {
    pub fn to_operator(&self, tol: &Tolerances) -> Result<HermitianOperator> {
        let d = self.d;
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !shape_ok(&self.re) || !shape_ok(&self.im) {
            return Err(Error::Malformed(format!(
                "re/im must both be {d}x{d} arrays"
            )));
        }
        let m = DMatrix::from_fn(d, d, |j, k| C64::new(self.re[j][k], self.im[j][k]));
        HermitianOperator::new(m, tol)
    }
}

impl Serialize for HermitianOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = OperatorJson::deserialize(d)?;
        raw.to_operator(&Tolerances::default())
            .map_err(serde::de::Error::custom)
    }
}
