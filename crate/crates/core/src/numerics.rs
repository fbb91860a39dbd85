//! Dense complex matrices, antiunitary-aware operators and a Hermitian
//! eigensolver.
//!
//! Everything here is sized for the small systems this crate deals with
//! (dimension at most a handful), so matrices are plain row-major `Vec`s and
//! products are naive triple loops.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A column vector of amplitudes.
pub type Ket = Vec<C64>;

/// Scale used when rounding entries into hashable keys.
const KEY_SCALE: f64 = 1e6;

/// Entries smaller than this are treated as zero when fixing a global phase.
const PHASE_PIVOT: f64 = 1e-6;

/// Absolute tolerance used by every numerical identity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance(f64);

impl Tolerance {
    pub const DEFAULT: f64 = 1e-9;

    pub fn new(abs_tol: f64) -> Result<Self> {
        if abs_tol > 0.0 && abs_tol.is_finite() {
            Ok(Self(abs_tol))
        } else {
            Err(Error::InvalidTolerance(abs_tol))
        }
    }

    #[inline]
    pub fn abs(self) -> f64 {
        self.0
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from rows. Fails unless the rows form a square array of
    /// finite numbers.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        let m = Self { dim, data };
        if !m.is_finite() {
            return Err(Error::VerificationFailed("non-finite matrix entry".into()));
        }
        Ok(m)
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let dim = values.len();
        Self::from_fn(dim, |r, c| if r == c { values[r] } else { C64::new(0.0, 0.0) })
    }

    /// `|v><v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// Hilbert-Schmidt inner product `tr(self^dagger other)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        let n = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..n {
            for k in 0..n {
                acc += self[(r, k)] * other[(k, r)];
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_hermitian(&self, tol: Tolerance) -> bool {
        self.hermiticity_deviation() <= tol.abs()
    }

    pub fn is_unitary(&self, tol: Tolerance) -> bool {
        self.unitarity_deviation() <= tol.abs()
    }

    pub fn apply(&self, v: &[C64]) -> Result<Ket> {
        check_dim(self.dim, v.len())?;
        Ok((0..self.dim)
            .map(|r| (0..self.dim).map(|c| self[(r, c)] * v[c]).sum())
            .collect())
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::identity(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// `self * other * self^dagger`.
    pub fn conjugate(&self, other: &Self) -> Self {
        &(self * other) * &self.adjoint()
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| self[(r / m, c / m)] * other[(r % m, c % m)])
    }

    /// Rounded entries, for hashing operators whose phase is already fixed
    /// (density matrices, for instance).
    pub fn entry_key(&self) -> Vec<i64> {
        let mut key = Vec::with_capacity(2 * self.data.len());
        for z in &self.data {
            key.push(round_key(z.re));
            key.push(round_key(z.im));
        }
        key
    }

    /// Key identifying the matrix up to a global phase: the first entry with
    /// non-negligible magnitude (row-major) is rotated to the positive real
    /// axis before rounding.
    pub fn projective_key(&self) -> Vec<i64> {
        self.phase_normalized().entry_key()
    }

    /// Copy rescaled by a unit phase so that its first non-negligible entry is
    /// real and positive.
    pub fn phase_normalized(&self) -> Self {
        match self.data.iter().find(|z| z.norm() > PHASE_PIVOT) {
            Some(pivot) => self.scale(pivot.conj() / pivot.norm()),
            None => self.clone(),
        }
    }
}

fn round_key(x: f64) -> i64 {
    let k = (x * KEY_SCALE).round() as i64;
    // fold -0 into 0
    if k == 0 {
        0
    } else {
        k
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr { dim: self.dim, entries: self.data.iter().map(|z| [z.re, z.im]).collect() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.dim == 0 || repr.entries.len() != repr.dim * repr.dim {
            return Err(serde::de::Error::custom(format!(
                "expected {} entries for dim {}, found {}",
                repr.dim * repr.dim,
                repr.dim,
                repr.entries.len()
            )));
        }
        let m = ComplexMatrix {
            dim: repr.dim,
            data: repr.entries.iter().map(|[re, im]| C64::new(*re, *im)).collect(),
        };
        if !m.is_finite() {
            return Err(serde::de::Error::custom("non-finite matrix entry"));
        }
        Ok(m)
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Equality up to a global phase.
///
/// Uses the Cauchy-Schwarz saturation test `|tr(a^dagger b)| >= |a| |b| - tol`
/// together with `| |a|^2 - |b|^2 | <= tol`. For unitaries this is
/// `|tr(a^dagger b)| >= d - tol`; for rank-1 projectors `|tr(ab)| >= 1 - tol`.
pub fn proj_equal(a: &ComplexMatrix, b: &ComplexMatrix, tol: Tolerance) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    let na = a.hs_inner(a).re;
    let nb = b.hs_inner(b).re;
    if (na - nb).abs() > tol.abs() {
        return Ok(false);
    }
    Ok(a.hs_inner(b).norm() >= (na * nb).sqrt() - tol.abs())
}

/// A unitary or antiunitary operator. An antiunitary element acts as
/// `v -> matrix * conj(v)`, conjugation taken in the computational basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub matrix: ComplexMatrix,
    pub antiunitary: bool,
}

impl GroupElement {
    pub fn new(matrix: ComplexMatrix, antiunitary: bool, tol: Tolerance) -> Result<Self> {
        let dev = matrix.unitarity_deviation();
        if dev > tol.abs() {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { matrix, antiunitary })
    }

    /// Wraps a matrix already known to be unitary.
    pub(crate) fn from_unitary(matrix: ComplexMatrix, antiunitary: bool) -> Self {
        Self { matrix, antiunitary }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_unitary(ComplexMatrix::identity(dim), false)
    }

    /// Complex conjugation in the computational basis.
    pub fn conjugation(dim: usize) -> Self {
        Self::from_unitary(ComplexMatrix::identity(dim), true)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `self * other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        let rhs = if self.antiunitary { other.matrix.conj() } else { other.matrix.clone() };
        Ok(Self::from_unitary(&self.matrix * &rhs, self.antiunitary ^ other.antiunitary))
    }

    pub fn inverse(&self) -> Self {
        if self.antiunitary {
            // (M K)^-1 = K M^dagger = conj(M^dagger) K = M^T K
            Self::from_unitary(self.matrix.transpose(), true)
        } else {
            Self::from_unitary(self.matrix.adjoint(), false)
        }
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::identity(self.dim());
        for _ in 0..k {
            acc = acc.compose(self).expect("same dimension");
        }
        acc
    }

    pub fn apply(&self, v: &[C64]) -> Result<Ket> {
        if self.antiunitary {
            let conj: Vec<C64> = v.iter().map(|z| z.conj()).collect();
            self.matrix.apply(&conj)
        } else {
            self.matrix.apply(v)
        }
    }

    /// `g A g^-1`. For a density matrix this is the transformed state.
    pub fn conjugate_operator(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_dim(self.dim(), a.dim())?;
        Ok(if self.antiunitary {
            self.matrix.conjugate(&a.conj())
        } else {
            self.matrix.conjugate(a)
        })
    }

    pub fn proj_equal(&self, other: &Self, tol: Tolerance) -> Result<bool> {
        Ok(self.antiunitary == other.antiunitary && proj_equal(&self.matrix, &other.matrix, tol)?)
    }

    /// Hashable key identifying the projective class of the element.
    pub fn projective_key(&self) -> (bool, Vec<i64>) {
        (self.antiunitary, self.matrix.projective_key())
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[k]` belongs to `values[k]`; its largest-magnitude component is
    /// real and positive.
    pub vectors: Vec<Ket>,
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic complex Jacobi diagonalization.
pub fn eig_hermitian(m: &ComplexMatrix, tol: Tolerance) -> Result<HermitianEigen> {
    let dev = m.hermiticity_deviation();
    if dev > tol.abs() {
        return Err(Error::NotHermitian(dev));
    }
    let n = m.dim();
    // symmetrize so roundoff in the input does not leak into the rotation angles
    let mut a = ComplexMatrix::from_fn(n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = order
        .iter()
        .map(|&k| fix_phase((0..n).map(|r| v[(r, k)]).collect()))
        .collect();
    Ok(HermitianEigen { values, vectors })
}

/// One Jacobi rotation zeroing `a[p][q]`. The rotation is `J = diag-phase * R`
/// with `R` the real symmetric Jacobi rotation of the phase-rotated pivot.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r < 1e-300 {
        return;
    }
    let phase = apq / r; // e^{i phi}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let zeta = (aqq - app) / (2.0 * r);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let t = if zeta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.dim();
    let e_minus = phase.conj();

    // A <- A J (columns)
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * e_minus * s;
        a[(k, q)] = akp * s + akq * e_minus * c;
    }
    // A <- J^dagger A (rows)
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    // V <- V J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * e_minus * s;
        v[(k, q)] = vkp * s + vkq * e_minus * c;
    }
}

/// Rotates the ket so its largest-magnitude component is real positive. Ties
/// (within 1e-12) go to the lowest index.
fn fix_phase(mut v: Ket) -> Ket {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(pivot) = v.iter().find(|z| z.norm() >= max - 1e-12).copied() {
        let ph = pivot.conj() / pivot.norm();
        for z in &mut v {
            *z *= ph;
        }
    }
    v
}
