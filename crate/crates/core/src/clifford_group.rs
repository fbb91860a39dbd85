//! Symplectic parametrization of the (extended) Clifford group.
//!
//! A pair `(F, chi)` with `F` a 2x2 matrix over `Z_dbar` of determinant `+-1`
//! and `chi` in `(Z_d)^2` maps to the operator `[F, chi]` satisfying
//! `U D_p U^-1 = omega^{<chi, F p>} D_{F p}`. Determinant `-1` pairs map to
//! antiunitary operators.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_group::FiniteGroup;
use crate::numerics::{ComplexMatrix, GroupElement, Tolerance};
use crate::weyl_heisenberg::{
    d_bar, displacement, displacement_lifted, omega_pow, tau_pow, DisplacementIndex,
};

pub type Mat2 = [[i64; 2]; 2];

fn modinv(a: i64, m: i64) -> Option<i64> {
    let (mut old_r, mut r) = (a.rem_euclid(m), m);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(m))
}

fn mat_mul(a: &Mat2, b: &Mat2, m: i64) -> Mat2 {
    let mut out = [[0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = (a[r][0] * b[0][c] + a[r][1] * b[1][c]).rem_euclid(m);
        }
    }
    out
}

fn mat_vec(a: &Mat2, v: [i64; 2], m: i64) -> [i64; 2] {
    [(a[0][0] * v[0] + a[0][1] * v[1]).rem_euclid(m), (a[1][0] * v[0] + a[1][1] * v[1]).rem_euclid(m)]
}

/// Element `(F, chi)` of `ESL(2, Z_dbar) x| (Z_d)^2`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymplecticPair {
    f: Mat2,
    chi: [i64; 2],
    d: usize,
}

impl SymplecticPair {
    /// Reduces entries and checks `det F = +-1 mod dbar`.
    pub fn new(f: Mat2, chi: [i64; 2], d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let db = d_bar(d) as i64;
        let f = [[f[0][0].rem_euclid(db), f[0][1].rem_euclid(db)], [f[1][0].rem_euclid(db), f[1][1].rem_euclid(db)]];
        let chi = [chi[0].rem_euclid(d as i64), chi[1].rem_euclid(d as i64)];
        let det = (f[0][0] * f[1][1] - f[0][1] * f[1][0]).rem_euclid(db);
        if det != 1 && det != db - 1 {
            return Err(Error::InvalidDeterminant { det, modulus: db });
        }
        Ok(Self { f, chi, d })
    }

    pub fn identity(d: usize) -> Self {
        Self::new([[1, 0], [0, 1]], [0, 0], d).expect("identity is valid")
    }

    /// `(J, 0)` with `J = diag(1, -1)`; maps to complex conjugation.
    pub fn conjugation(d: usize) -> Self {
        Self::new([[1, 0], [0, -1]], [0, 0], d).expect("J is valid")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_bar(&self) -> usize {
        d_bar(self.d)
    }

    pub fn f(&self) -> Mat2 {
        self.f
    }

    pub fn chi(&self) -> [i64; 2] {
        self.chi
    }

    /// `+1` or `-1`.
    pub fn det_sign(&self) -> i8 {
        let db = self.d_bar() as i64;
        if (self.f[0][0] * self.f[1][1] - self.f[0][1] * self.f[1][0]).rem_euclid(db) == 1 {
            1
        } else {
            -1
        }
    }

    pub fn is_antiunitary(&self) -> bool {
        self.det_sign() < 0
    }

    /// `(F1, chi1) o (F2, chi2) = (F1 F2, chi1 + F1 chi2)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: other.d });
        }
        let db = self.d_bar() as i64;
        let f = mat_mul(&self.f, &other.f, db);
        let moved = mat_vec(&self.f, other.chi, db);
        Self::new(f, [self.chi[0] + moved[0], self.chi[1] + moved[1]], self.d)
    }

    /// `(F^-1, -F^-1 chi)`.
    pub fn inverse(&self) -> Self {
        let db = self.d_bar() as i64;
        let det = self.det_sign() as i64;
        let [[a, b], [c, dd]] = self.f;
        let inv = [[(det * dd).rem_euclid(db), (-det * b).rem_euclid(db)], [(-det * c).rem_euclid(db), (det * a).rem_euclid(db)]];
        let moved = mat_vec(&inv, self.chi, db);
        Self::new(inv, [-moved[0], -moved[1]], self.d).expect("inverse keeps the determinant class")
    }

    /// `F p` over `Z_dbar`.
    pub fn act_lifted(&self, p: DisplacementIndex) -> [i64; 2] {
        mat_vec(&self.f, [p.p1 as i64, p.p2 as i64], self.d_bar() as i64)
    }

    /// All pairs of the (extended) semidirect product in lexicographic order
    /// `(alpha, beta, gamma, delta, chi1, chi2)`.
    pub fn all(d: usize, extended: bool) -> Vec<Self> {
        let db = d_bar(d) as i64;
        let mut out = Vec::new();
        for a in 0..db {
            for b in 0..db {
                for c in 0..db {
                    for dd in 0..db {
                        let det = (a * dd - b * c).rem_euclid(db);
                        if det != 1 && !(extended && det == db - 1) {
                            continue;
                        }
                        for x in 0..d as i64 {
                            for y in 0..d as i64 {
                                out.push(Self { f: [[a, b], [c, dd]], chi: [x, y], d });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Debug for SymplecticPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.f, self.chi)
    }
}

impl fmt::Display for SymplecticPair {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [[a, b], [c, d]] = self.f;
        write!(fm, "[(({a},{b}),({c},{d})), ({},{})]", self.chi[0], self.chi[1])
    }
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    #[serde(rename = "F")]
    f: Mat2,
    chi: [i64; 2],
    antiunitary: bool,
    #[serde(default = "default_dim")]
    d: usize,
}

fn default_dim() -> usize {
    4
}

impl Serialize for SymplecticPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PairRepr { f: self.f, chi: self.chi, antiunitary: self.is_antiunitary(), d: self.d }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymplecticPair {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = PairRepr::deserialize(de)?;
        let pair = SymplecticPair::new(repr.f, repr.chi, repr.d).map_err(serde::de::Error::custom)?;
        if pair.is_antiunitary() != repr.antiunitary {
            return Err(serde::de::Error::custom("antiunitary flag disagrees with det F"));
        }
        Ok(pair)
    }
}

/// Operator image of a symplectic pair.
#[derive(Clone, Debug)]
pub struct CliffordElement {
    pub source: SymplecticPair,
    pub op: GroupElement,
}

/// `V_F` for `det F = 1` and `beta` invertible mod `dbar`.
pub fn v_matrix(f: Mat2, d: usize) -> Option<ComplexMatrix> {
    let db = d_bar(d) as i64;
    let [[alpha, beta], [_, delta]] = f;
    let beta_inv = modinv(beta, db)?;
    let norm = 1.0 / (d as f64).sqrt();
    Some(ComplexMatrix::from_fn(d, |r, s| {
        let (r, s) = (r as i64, s as i64);
        tau_pow(beta_inv * (alpha * s * s - 2 * r * s + delta * r * r), d) * norm
    }))
}

/// `V_F` for any `det F = 1`, using `F = F1 F2` with the smallest `x >= 0`
/// making `delta + x beta` invertible when `beta` is not.
fn v_matrix_any(f: Mat2, d: usize) -> Result<ComplexMatrix> {
    if let Some(v) = v_matrix(f, d) {
        return Ok(v);
    }
    let db = d_bar(d) as i64;
    let [[alpha, beta], [gamma, delta]] = f;
    let x = (0..db)
        .find(|x| modinv(delta + x * beta, db).is_some())
        .ok_or_else(|| Error::VerificationFailed(format!("no factorization for {f:?}")))?;
    let f1 = [[0, -1], [1, x]];
    let f2 = [[gamma + x * alpha, delta + x * beta], [-alpha, -beta]];
    let v1 = v_matrix(f1, d).expect("beta of F1 is -1");
    let v2 = v_matrix(f2, d).expect("beta of F2 is invertible by choice of x");
    Ok(&v1 * &v2)
}

/// `[F, chi]`. For `det F = -1` the result is `[F J, chi]` followed by
/// complex conjugation, since `(F, chi) = (F J, chi) o (J, 0)`.
pub fn to_operator(s: &SymplecticPair) -> Result<CliffordElement> {
    let d = s.d();
    let shift = displacement(DisplacementIndex::new(s.chi[0], s.chi[1], d), d);
    let op = if s.is_antiunitary() {
        let [[a, b], [c, dd]] = s.f;
        let fj = [[a, -b], [c, -dd]];
        GroupElement::from_unitary(&shift * &v_matrix_any(fj, d)?, true)
    } else {
        GroupElement::from_unitary(&shift * &v_matrix_any(s.f, d)?, false)
    };
    Ok(CliffordElement { source: *s, op })
}

/// `U D_p U^-1 = omega^{phase_exponent} D_{image}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConjugationImage {
    pub phase_exponent: usize,
    pub image: DisplacementIndex,
}

/// Predicted action on a displacement operator, checked numerically. The phase
/// is exact in both determinant sectors.
pub fn conjugation_action(c: &CliffordElement, p: DisplacementIndex, tol: Tolerance) -> Result<ConjugationImage> {
    let s = &c.source;
    let d = s.d();
    let di = d as i64;
    let [q1, q2] = s.act_lifted(p);
    let image = DisplacementIndex::new(q1, q2, d);
    // omega^{<chi, Fp>} D_{Fp} with Fp over Z_dbar; D_{Fp} = tau^m D_{Fp mod d}
    // where m = q1 q2 - r1 r2 is a multiple of d (even when d is even), so the
    // extra phase is omega^{m/2} for even d and 1 for odd d.
    let symp = s.chi[1] * q1 - s.chi[0] * q2;
    let lift = q1 * q2 - image.p1 as i64 * image.p2 as i64;
    let extra = if d % 2 == 0 { (lift / 2).rem_euclid(di) } else { 0 };
    let phase_exponent = (symp + extra).rem_euclid(di) as usize;

    let lhs = c.op.conjugate_operator(&displacement(p, d))?;
    let rhs = displacement(image, d).scale(omega_pow(phase_exponent as i64, d));
    let dev = lhs.max_abs_diff(&rhs);
    if dev > tol.abs() {
        return Err(Error::VerificationFailed(format!(
            "conjugation law fails for {s} on {p}: deviation {dev:e}"
        )));
    }
    debug_assert!(lhs.max_abs_diff(&displacement_lifted(q1, q2, d).scale(omega_pow(symp, d))) <= tol.abs());
    Ok(ConjugationImage { phase_exponent, image })
}

/// True when conjugation by `op` maps every displacement operator to a phase
/// times a displacement operator.
pub fn normalizes_displacements(op: &GroupElement, d: usize, tol: Tolerance) -> bool {
    let ds: Vec<ComplexMatrix> = DisplacementIndex::all(d).map(|p| displacement(p, d)).collect();
    ds.iter().all(|dp| {
        let img = op.conjugate_operator(dp).expect("same dimension");
        ds.iter().any(|dq| img.hs_inner(dq).norm() >= d as f64 - tol.abs())
    })
}

/// One representative per projective element of the (extended) Clifford
/// group.
pub struct CliffordGroup {
    d: usize,
    extended: bool,
    elements: Vec<CliffordElement>,
    index: HashMap<(bool, Vec<i64>), usize>,
    kernel: Vec<SymplecticPair>,
    pairs_scanned: usize,
    table: OnceLock<FiniteGroup>,
}

impl CliffordGroup {
    /// Maps every pair of the semidirect product through [`to_operator`] and
    /// keeps the first pair hitting each projective class.
    pub fn enumerate(d: usize, extended: bool) -> Result<Self> {
        let pairs = SymplecticPair::all(d, extended);
        let identity_key = GroupElement::identity(d).projective_key();
        let mut elements = Vec::new();
        let mut index = HashMap::new();
        let mut kernel = Vec::new();
        for pair in &pairs {
            let el = to_operator(pair)?;
            let key = el.op.projective_key();
            if key == identity_key {
                kernel.push(*pair);
            }
            if !index.contains_key(&key) {
                index.insert(key, elements.len());
                elements.push(el);
            }
        }
        Ok(Self { d, extended, elements, index, kernel, pairs_scanned: pairs.len(), table: OnceLock::new() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[CliffordElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CliffordElement {
        &self.elements[i]
    }

    /// Pairs mapped to the projective identity.
    pub fn kernel(&self) -> &[SymplecticPair] {
        &self.kernel
    }

    pub fn pairs_scanned(&self) -> usize {
        self.pairs_scanned
    }

    pub fn lookup(&self, op: &GroupElement) -> Option<usize> {
        self.index.get(&op.projective_key()).copied()
    }

    pub fn lookup_pair(&self, pair: &SymplecticPair) -> Result<Option<usize>> {
        Ok(self.lookup(&to_operator(pair)?.op))
    }

    pub fn unitary_indices(&self) -> Vec<usize> {
        (0..self.order()).filter(|&i| !self.elements[i].op.antiunitary).collect()
    }

    /// Multiplication table from operator products (built once).
    pub fn table(&self) -> &FiniteGroup {
        self.table.get_or_init(|| {
            let ops: Vec<GroupElement> = self.elements.iter().map(|e| e.op.clone()).collect();
            FiniteGroup::from_elements(&ops, |a, b| a.compose(b).expect("same dimension"), |g| g.projective_key())
                .expect("the enumerated Clifford group is closed")
        })
    }
}
