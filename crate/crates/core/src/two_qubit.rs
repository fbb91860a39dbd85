//! The orbit read as two-qubit states: generalized Bloch vectors, the sign
//! patterns that parametrize them, sign functions, concurrence, reduced-state
//! purity and the partial-transpose simplex.
//!
//! Qubit ordering: `e_{2j+k} = |j>|k>`. `r` belongs to the second qubit
//! (`I (x) sigma`), `s` to the first (`sigma (x) I`), and `C[j][k]` is the
//! expectation of `sigma_j (x) sigma_k`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, norm, ComplexMatrix, Ket, Tolerance, C64};
use crate::sic_orbits::{FiducialOrbit, NUM_SICS};
use crate::weyl_heisenberg::{displacement, DisplacementIndex, SicConstants};

/// Tolerance used when matching a Bloch vector against a table entry.
pub const PATTERN_TOL: f64 = 1e-7;

/// Defining basis for the two-qubit reading of a 4-dimensional state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Product,
    Bell,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Product => "product",
            Basis::Bell => "bell",
        })
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "product" => Ok(Basis::Product),
            "bell" => Ok(Basis::Bell),
            other => Err(format!("unknown basis '{other}' (expected product or bell)")),
        }
    }
}

/// Unitary whose columns are the Bell kets
/// `(|00>+|11>, |00>-|11>, |01>+|10>, |01>-|10>) / sqrt 2`.
pub fn bell_basis_map() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let cols: [[f64; 4]; 4] = [[h, 0.0, 0.0, h], [h, 0.0, 0.0, -h], [0.0, h, h, 0.0], [0.0, h, -h, 0.0]];
    ComplexMatrix::from_fn(4, |r, c| C64::new(cols[c][r], 0.0))
}

/// The physical two-qubit state for a defining basis. In Bell mode the basis
/// ket `e_k` is identified with the `k`-th Bell ket, so `rho` becomes
/// `B rho B^dag`.
pub fn in_basis(rho: &ComplexMatrix, basis: Basis) -> ComplexMatrix {
    match basis {
        Basis::Product => rho.clone(),
        Basis::Bell => bell_basis_map().conjugate(rho),
    }
}

/// Ket version of [`in_basis`].
pub fn ket_in_basis(psi: &[C64], basis: Basis) -> Result<Ket> {
    match basis {
        Basis::Product => Ok(psi.to_vec()),
        Basis::Bell => bell_basis_map().apply(psi),
    }
}

/// Pauli matrix `sigma_k`, `k = 0` being the identity.
pub fn pauli(k: usize) -> ComplexMatrix {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let e = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => panic!("Pauli index {k} out of range"),
    };
    ComplexMatrix::from_fn(2, |r, c| e[2 * r + c])
}

fn pauli_pair(j: usize, k: usize) -> ComplexMatrix {
    pauli(j).kron(&pauli(k))
}

/// Generalized Bloch vector of a two-qubit state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gbv {
    /// Second qubit.
    pub r: [f64; 3],
    /// First qubit.
    pub s: [f64; 3],
    pub c: [[f64; 3]; 3],
}

impl Gbv {
    pub fn from_density(rho: &ComplexMatrix, tol: Tolerance) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
        }
        let dev = rho.hermiticity_deviation();
        if dev > tol.abs() {
            return Err(Error::NotHermitian(dev));
        }
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > tol.abs() {
            return Err(Error::WrongTrace(tr));
        }
        let ev = |j: usize, k: usize| rho.trace_product(&pauli_pair(j, k)).re;
        let mut g = Gbv { r: [0.0; 3], s: [0.0; 3], c: [[0.0; 3]; 3] };
        for j in 0..3 {
            g.r[j] = ev(0, j + 1);
            g.s[j] = ev(j + 1, 0);
            for k in 0..3 {
                g.c[j][k] = ev(j + 1, k + 1);
            }
        }
        Ok(g)
    }

    /// `(I + sum r_j I sigma_j + sum s_j sigma_j I + sum C_jk sigma_j sigma_k) / 4`
    pub fn to_density(&self) -> ComplexMatrix {
        let mut rho = ComplexMatrix::identity(4);
        for j in 0..3 {
            rho = &rho + &pauli_pair(0, j + 1).scale(C64::new(self.r[j], 0.0));
            rho = &rho + &pauli_pair(j + 1, 0).scale(C64::new(self.s[j], 0.0));
            for k in 0..3 {
                rho = &rho + &pauli_pair(j + 1, k + 1).scale(C64::new(self.c[j][k], 0.0));
            }
        }
        rho.scale(C64::new(0.25, 0.0))
    }

    /// `|r|^2 + |s|^2 + |C|_F^2`, equal to 3 for pure states.
    pub fn norm_sq(&self) -> f64 {
        let sq = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>();
        sq(&self.r) + sq(&self.s) + self.c.iter().map(sq).sum::<f64>()
    }

    /// Components in the order `r, s, C` (row-major).
    pub fn components(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        out[..3].copy_from_slice(&self.r);
        out[3..6].copy_from_slice(&self.s);
        for j in 0..3 {
            out[6 + 3 * j..9 + 3 * j].copy_from_slice(&self.c[j]);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components().iter().zip(other.components()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// The eight sign factors of a table entry together with its class and basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SignPattern {
    pub a: i8,
    pub b: i8,
    pub alpha: [i8; 3],
    pub beta: [i8; 3],
    pub class_id: u8,
    pub basis: Basis,
}

fn sign_of(bit: usize) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

fn delta(x: i8, y: i8) -> f64 {
    if x == y {
        1.0
    } else {
        0.0
    }
}

fn ipow(x: i8, e: i8) -> f64 {
    if e == 0 {
        1.0
    } else {
        f64::from(x)
    }
}

impl SignPattern {
    /// All 256 sign assignments of one class and basis.
    pub fn all(class_id: u8, basis: Basis) -> Vec<Self> {
        (0..256usize)
            .map(|m| SignPattern {
                a: sign_of(m & 1),
                b: sign_of(m >> 1 & 1),
                alpha: [sign_of(m >> 2 & 1), sign_of(m >> 3 & 1), sign_of(m >> 4 & 1)],
                beta: [sign_of(m >> 5 & 1), sign_of(m >> 6 & 1), sign_of(m >> 7 & 1)],
                class_id,
                basis,
            })
            .collect()
    }

    /// The class constraint product; physical patterns give `+1`.
    pub fn constraint(&self) -> i8 {
        let pa: i8 = self.alpha.iter().product();
        let pb: i8 = self.beta.iter().product();
        let lead = match (self.basis, self.class_id) {
            (Basis::Product, 2) => self.b,
            (Basis::Bell, 2) => -self.a * self.b,
            _ => self.a * self.b,
        };
        lead * pa * pb
    }

    pub fn satisfies_constraint(&self) -> bool {
        self.constraint() == 1
    }

    /// The Bloch vector prescribed by the structure table.
    pub fn predicted(&self) -> Gbv {
        let k = SicConstants::new();
        let (a, b) = (self.a, self.b);
        let [a1, a2, a3] = self.alpha.map(f64::from);
        let [b1, b2, b3] = self.beta.map(f64::from);
        let (af, bf) = (f64::from(a), f64::from(b));
        let am = |x: i8| k.a(x);
        let gf = |x: i8| k.gs(x);
        let bb = k.b;
        let r2 = std::f64::consts::SQRT_2;
        let e1 = (1 - b) / 2;
        let e2 = (1 + b) / 2;
        let (r, s, c) = match (self.basis, self.class_id) {
            (Basis::Product, 1) => (
                [b1 * am(b), b2 * am(-b), b3 * bb],
                [a1 * bb, a2 * am(a), a3 * am(-a)],
                [
                    [a1 * b1 * am(-b), a1 * b2 * am(b), a1 * b3 * bb],
                    [
                        r2 * af * a2 * b1 * am(a) * delta(a, b),
                        r2 * af * a2 * b2 * am(a) * delta(a, -b),
                        a2 * b3 * am(-a),
                    ],
                    [
                        -r2 * af * a3 * b1 * am(-a) * delta(-a, b),
                        -r2 * af * a3 * b2 * am(-a) * delta(a, b),
                        a3 * b3 * am(a),
                    ],
                ],
            ),
            (Basis::Product, _) => (
                [b1 * am(a), b2 * am(a), b3 * bb],
                [a1 * bb, a2 * am(a), a3 * am(a)],
                [
                    [a1 * b1 * am(-a), a1 * b2 * am(-a), a1 * b3 * bb],
                    [ipow(a, e1) * a2 * b1 * gf(-b), ipow(a, e2) * a2 * b2 * gf(b), a2 * b3 * am(-a)],
                    [ipow(a, e2) * a3 * b1 * gf(b), ipow(a, e1) * a3 * b2 * gf(-b), a3 * b3 * am(-a)],
                ],
            ),
            (Basis::Bell, 1) => (
                [b1 * bb, r2 * b2 * am(a) * delta(a, b), r2 * b3 * am(-a) * delta(-a, b)],
                [a1 * bb, a2 * am(b), a3 * am(b)],
                [
                    [a1 * b1 * bb, r2 * a1 * b2 * am(-a) * delta(a, b), r2 * a1 * b3 * am(a) * delta(-a, b)],
                    [a2 * b1 * am(-b), bf * a2 * b2 * am(a), bf * a2 * b3 * am(-a)],
                    [a3 * b1 * am(-b), af * a3 * b2 * am(a), -af * a3 * b3 * am(-a)],
                ],
            ),
            (Basis::Bell, _) => (
                [b1 * bb, b2 * gf(-b), b3 * gf(b)],
                [a1 * bb, a2 * am(-a), a3 * am(a)],
                [
                    [a1 * b1 * bb, -bf * a1 * b2 * gf(-b), bf * a1 * b3 * gf(b)],
                    [a2 * b1 * am(a), ipow(-a, e1) * a2 * b2 * am(-a), ipow(-a, e2) * a2 * b3 * am(-a)],
                    [a3 * b1 * am(-a), ipow(a, e1) * a3 * b2 * am(a), ipow(a, e2) * a3 * b3 * am(a)],
                ],
            ),
        };
        Gbv { r, s, c }
    }

    /// Density matrix of the predicted Bloch vector, in the pattern's basis.
    pub fn predicted_density(&self) -> ComplexMatrix {
        self.predicted().to_density()
    }
}

/// Unique physical pattern (either class) whose table entry reproduces `g`.
/// `None` if nothing matches.
pub fn match_sign_pattern(g: &Gbv, basis: Basis, tol: f64) -> Result<Option<SignPattern>> {
    let hits: Vec<SignPattern> = [1u8, 2]
        .iter()
        .flat_map(|&c| SignPattern::all(c, basis))
        .filter(|p| p.satisfies_constraint() && p.predicted().max_abs_diff(g) <= tol)
        .collect();
    match hits.len() {
        0 => Ok(None),
        1 => Ok(Some(hits[0])),
        n => Err(Error::AmbiguousPattern(n)),
    }
}

/// The three sign functions `(h1, h2, h3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SignFunctions {
    pub h1: i8,
    pub h2: i8,
    pub h3: i8,
}

pub fn sign_functions(p: &SignPattern) -> SignFunctions {
    let (a, b) = (p.a, p.b);
    let [a1, a2, a3] = p.alpha;
    let [b1, b2, b3] = p.beta;
    let (h1, h2, h3) = match (p.basis, p.class_id) {
        (Basis::Product, 1) => (b * a2 * a3 * b3, a1 * a2 * a3, a * b * a1),
        (Basis::Product, _) => (a * b * a1 * b3, -a1 * a2 * a3, b * a1),
        (Basis::Bell, 1) => (-b * a1 * b1 * b2 * b3, -b1 * b2 * b3, a * b * b1),
        (Basis::Bell, _) => (a * b * a1, -a * b1 * b2 * b3, b * b1),
    };
    SignFunctions { h1, h2, h3 }
}

/// Sign-function values of the 16 SICs: `h1` is fixed along a row of the
/// 4x4 label arrangement, `(h2, h3)` along a column.
pub fn expected_sign_functions(label: usize) -> Result<SignFunctions> {
    if !(1..=NUM_SICS).contains(&label) {
        return Err(Error::InvalidLabel(label));
    }
    const H1: [i8; 4] = [-1, 1, 1, -1];
    const H23: [(i8, i8); 4] = [(1, -1), (1, 1), (-1, 1), (-1, -1)];
    let (h2, h3) = H23[(label - 1) % 4];
    Ok(SignFunctions { h1: H1[(label - 1) / 4], h2, h3 })
}

/// `|<psi| sigma_y (x) sigma_y |psi*>|` in the computational product basis.
pub fn concurrence(psi: &[C64], tol: Tolerance) -> Result<f64> {
    if psi.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: psi.len() });
    }
    let n = norm(psi);
    if (n - 1.0).abs() > tol.abs() {
        return Err(Error::NotNormalized(n));
    }
    // <psi| yy |psi*> = -(2 (psi0 psi3 - psi1 psi2))^*, modulus suffices
    Ok((2.0 * (psi[0] * psi[3] - psi[1] * psi[2])).norm())
}

/// Reduced state of the first qubit.
pub fn reduce_first(rho: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |j, jp| (0..2).map(|k| rho[(2 * j + k, 2 * jp + k)]).sum())
}

/// Reduced state of the second qubit.
pub fn reduce_second(rho: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(2, |k, kp| (0..2).map(|j| rho[(2 * j + k, 2 * j + kp)]).sum())
}

pub fn purity(rho: &ComplexMatrix) -> f64 {
    rho.trace_product(rho).re
}

/// Average reduced purity of a random pure state of a `d1 x d2` system.
pub fn purity_formula(d1: usize, d2: usize) -> f64 {
    (d1 + d2) as f64 / (d1 * d2 + 1) as f64
}

/// Mean purity of the first-qubit reduced state over `states`.
pub fn avg_reduced_purity(states: &[ComplexMatrix]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::WrongCardinality { expected: 1, found: 0 });
    }
    for s in states {
        if s.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: s.dim() });
        }
    }
    Ok(states.iter().map(|s| purity(&reduce_first(s))).sum::<f64>() / states.len() as f64)
}

/// Histogram of concurrence values, clustered at `1e-9`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcurrenceCensus {
    pub label: usize,
    pub basis: Basis,
    /// `(value, count)`, ascending.
    pub bins: Vec<(f64, usize)>,
}

impl ConcurrenceCensus {
    pub fn count_near(&self, value: f64, tol: f64) -> usize {
        self.bins.iter().filter(|(v, _)| (v - value).abs() <= tol).map(|(_, c)| c).sum()
    }
}

fn cluster(mut xs: Vec<f64>, gap: f64) -> Vec<(f64, usize)> {
    xs.sort_by(f64::total_cmp);
    let mut bins: Vec<(f64, usize)> = Vec::new();
    for x in xs {
        match bins.last_mut() {
            Some((v, c)) if (x - *v).abs() <= gap => *c += 1,
            _ => bins.push((x, 1)),
        }
    }
    bins
}

pub fn concurrence_census(orbit: &FiducialOrbit, label: usize, basis: Basis) -> Result<ConcurrenceCensus> {
    orbit.sic_states(label)?;
    let start = (label - 1) * 16;
    let values = (start..start + 16)
        .map(|i| concurrence(&ket_in_basis(orbit.ket(i), basis)?, Tolerance::default()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcurrenceCensus { label, basis, bins: cluster(values, 1e-9) })
}

/// Distinct reduced states of one qubit over a SIC.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QubitCensus {
    pub points: Vec<[f64; 3]>,
    /// Number of fiducials sharing each point.
    pub multiplicities: Vec<usize>,
    pub cube: Option<CubeReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CubeReport {
    pub edge: f64,
    pub face_diagonal: f64,
    pub body_diagonal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedStateCensus {
    pub label: usize,
    pub basis: Basis,
    pub first: QubitCensus,
    pub second: QubitCensus,
}

/// Eight points form a cube iff their 28 pairwise distances take three values
/// in ratio `1 : sqrt 2 : sqrt 3` with counts 12, 12, 4.
pub fn detect_cube(points: &[[f64; 3]], tol: f64) -> Option<CubeReport> {
    if points.len() != 8 {
        return None;
    }
    let mut dists = Vec::with_capacity(28);
    for i in 0..8 {
        for j in i + 1..8 {
            let d: f64 = (0..3).map(|k| (points[i][k] - points[j][k]).powi(2)).sum::<f64>().sqrt();
            dists.push(d);
        }
    }
    let bins = cluster(dists, tol);
    if bins.len() != 3 || bins.iter().map(|b| b.1).collect::<Vec<_>>() != [12, 12, 4] {
        return None;
    }
    let e = bins[0].0;
    let ok = (bins[1].0 - e * 2f64.sqrt()).abs() <= tol && (bins[2].0 - e * 3f64.sqrt()).abs() <= tol;
    ok.then_some(CubeReport { edge: e, face_diagonal: bins[1].0, body_diagonal: bins[2].0 })
}

fn qubit_census(vectors: Vec<[f64; 3]>, tol: f64) -> QubitCensus {
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut multiplicities = Vec::new();
    for v in vectors {
        match points.iter().position(|p| (0..3).all(|k| (p[k] - v[k]).abs() <= tol)) {
            Some(i) => multiplicities[i] += 1,
            None => {
                points.push(v);
                multiplicities.push(1);
            }
        }
    }
    let cube = detect_cube(&points, tol);
    QubitCensus { points, multiplicities, cube }
}

pub fn reduced_state_census(orbit: &FiducialOrbit, label: usize, basis: Basis, tol: f64) -> Result<ReducedStateCensus> {
    let states = orbit.sic_states(label)?;
    let tol_m = Tolerance::new(1e-9)?;
    let gbvs = states
        .iter()
        .map(|s| Gbv::from_density(&in_basis(s, basis), tol_m))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReducedStateCensus {
        label,
        basis,
        first: qubit_census(gbvs.iter().map(|g| g.s).collect(), tol),
        second: qubit_census(gbvs.iter().map(|g| g.r).collect(), tol),
    })
}

/// Transpose on the second qubit: `<j k|Q|j' k'> = <j k'|rho|j' k>`.
pub fn partial_transpose(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    Ok(ComplexMatrix::from_fn(4, |r, c| {
        let (j, k) = (r / 2, r % 2);
        let (jp, kp) = (c / 2, c % 2);
        rho[(2 * j + kp, 2 * jp + k)]
    }))
}

/// Product-basis class-1 patterns that break the class constraint.
pub fn violating_patterns() -> Vec<SignPattern> {
    SignPattern::all(1, Basis::Product).into_iter().filter(|p| !p.satisfies_constraint()).collect()
}

/// Outcome of building `Q` from a constraint-violating pattern.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexCheck {
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub hermitian: bool,
    /// Largest `|tr(Q D_p Q D_p^dag) - 1/5|` over `p != 0`.
    pub max_simplex_deviation: f64,
    /// Orbit index of the partial transpose of `Q`.
    pub partial_transpose_of: Option<usize>,
}

impl SimplexCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.hermitian
            && (self.trace - 1.0).abs() <= tol
            && self.min_eigenvalue < -tol
            && self.max_simplex_deviation <= tol
            && self.partial_transpose_of.is_some()
    }
}

pub fn partial_transpose_simplex_check(orbit: &FiducialOrbit, p: &SignPattern, tol: Tolerance) -> Result<SimplexCheck> {
    if p.basis != Basis::Product || p.class_id != 1 {
        return Err(Error::VerificationFailed("simplex check needs a product-basis class-1 pattern".into()));
    }
    if p.satisfies_constraint() {
        return Err(Error::ConstraintSatisfied);
    }
    let q = p.predicted_density();
    let hermitian = q.is_hermitian(tol);
    let min_eigenvalue = eig_hermitian(&q, tol)?.values[0];
    let max_simplex_deviation = DisplacementIndex::all(4)
        .into_iter()
        .filter(|d| d.linear(4) != 0)
        .map(|d| {
            let dp = displacement(d, 4);
            (q.trace_product(&dp.conjugate(&q)).re - 0.2).abs()
        })
        .fold(0.0, f64::max);
    let partial_transpose_of = orbit.lookup(&partial_transpose(&q)?);
    Ok(SimplexCheck { min_eigenvalue, trace: q.trace().re, hermitian, max_simplex_deviation, partial_transpose_of })
}

/// Operator-Schmidt rank of a two-qubit operator: the rank of the realigned
/// matrix `R[(j j'), (k k')] = U[(j k), (j' k')]`.
pub fn operator_schmidt_rank(u: &ComplexMatrix, threshold: f64) -> Result<usize> {
    if u.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: u.dim() });
    }
    let r = ComplexMatrix::from_fn(4, |row, col| {
        let (j, jp) = (row / 2, row % 2);
        let (k, kp) = (col / 2, col % 2);
        u[(2 * j + k, 2 * jp + kp)]
    });
    let gram = &r * &r.adjoint();
    let eig = eig_hermitian(&gram, Tolerance::new(1e-9)?)?;
    Ok(eig.values.iter().filter(|&&v| v.max(0.0).sqrt() > threshold).count())
}

/// Per-state analysis of one orbit fiducial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiducialAnalysis {
    pub index: usize,
    pub label: usize,
    pub pattern: SignPattern,
    pub signs: SignFunctions,
    pub concurrence: f64,
    pub gbv_norm_sq: f64,
}

/// Per-SIC summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SicTwoQubitSummary {
    pub label: usize,
    pub classes: Vec<u8>,
    /// Distinct sign-function triples over the 16 fiducials.
    pub signs: Vec<SignFunctions>,
    pub avg_purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoQubitAnalysis {
    pub basis: Basis,
    pub fiducials: Vec<FiducialAnalysis>,
    pub sics: Vec<SicTwoQubitSummary>,
}

impl TwoQubitAnalysis {
    /// Matches every orbit fiducial against the structure tables. Fails if a
    /// fiducial matches nothing or more than one entry.
    pub fn compute(orbit: &FiducialOrbit, basis: Basis, tol: Tolerance) -> Result<Self> {
        let fiducials = (0..orbit.len())
            .into_par_iter()
            .map(|i| {
                let rho = in_basis(orbit.projector(i), basis);
                let g = Gbv::from_density(&rho, tol)?;
                let pattern = match_sign_pattern(&g, basis, PATTERN_TOL)?
                    .ok_or_else(|| Error::VerificationFailed(format!("fiducial {i} matches no table entry")))?;
                Ok(FiducialAnalysis {
                    index: i,
                    label: orbit.sic_label(i),
                    pattern,
                    signs: sign_functions(&pattern),
                    concurrence: concurrence(&ket_in_basis(orbit.ket(i), basis)?, tol)?,
                    gbv_norm_sq: g.norm_sq(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let sics = (1..=NUM_SICS)
            .map(|label| {
                let rows: Vec<&FiducialAnalysis> = fiducials.iter().filter(|f| f.label == label).collect();
                let mut classes: Vec<u8> = rows.iter().map(|f| f.pattern.class_id).collect();
                classes.sort();
                classes.dedup();
                let mut signs: Vec<SignFunctions> = rows.iter().map(|f| f.signs).collect();
                signs.sort();
                signs.dedup();
                let states: Vec<ComplexMatrix> =
                    orbit.sic_states(label)?.iter().map(|s| in_basis(s, basis)).collect();
                Ok(SicTwoQubitSummary { label, classes, signs, avg_purity: avg_reduced_purity(&states)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, fiducials, sics })
    }

    /// Fiducial count per class.
    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut m = BTreeMap::new();
        for f in &self.fiducials {
            *m.entry(f.pattern.class_id).or_insert(0) += 1;
        }
        m
    }

    /// True iff every SIC has a single sign-function triple equal to the
    /// expected table value.
    pub fn reproduces_sign_table(&self) -> bool {
        self.sics.iter().all(|s| s.signs.len() == 1 && expected_sign_functions(s.label).ok() == Some(s.signs[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn orbit() -> &'static FiducialOrbit {
        static O: OnceLock<FiducialOrbit> = OnceLock::new();
        O.get_or_init(|| FiducialOrbit::enumerate(Tolerance::default()).unwrap())
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn maximally_mixed_has_zero_vector() {
        let g = Gbv::from_density(&ComplexMatrix::identity(4).scale(c(0.25)), tol()).unwrap();
        assert!(g.components().iter().all(|x| x.abs() < 1e-15));
        assert_eq!(match_sign_pattern(&g, Basis::Product, PATTERN_TOL).unwrap(), None);
    }

    #[test]
    fn computational_zero_state() {
        let rho = ComplexMatrix::outer(&[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let g = Gbv::from_density(&rho, tol()).unwrap();
        assert_eq!(g.r, [0.0, 0.0, 1.0]);
        assert_eq!(g.s, [0.0, 0.0, 1.0]);
        assert_eq!(g.c, [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]]);
        assert!(g.to_density().max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn qubit_order_is_first_slow() {
        // |01>: first qubit up, second down
        let rho = ComplexMatrix::outer(&[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let g = Gbv::from_density(&rho, tol()).unwrap();
        assert_eq!(g.s[2], 1.0);
        assert_eq!(g.r[2], -1.0);
    }

    #[test]
    fn gbv_rejects_bad_input() {
        let mut m = ComplexMatrix::identity(4).scale(c(0.25));
        m[(0, 1)] = c(0.1);
        assert!(matches!(Gbv::from_density(&m, tol()), Err(Error::NotHermitian(_))));
        let m = ComplexMatrix::identity(4);
        assert!(matches!(Gbv::from_density(&m, tol()), Err(Error::WrongTrace(_))));
    }

    #[test]
    fn bell_map_columns_and_unitarity() {
        let m = bell_basis_map();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m[(0, 0)].re - h).abs() < 1e-15 && (m[(3, 0)].re - h).abs() < 1e-15);
        assert!(m[(1, 0)].norm() < 1e-15 && m[(2, 0)].norm() < 1e-15);
        assert!(m.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn concurrence_of_standard_states() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(concurrence(&[c(1.0), c(0.0), c(0.0), c(0.0)], tol()).unwrap().abs() < 1e-15);
        assert!((concurrence(&[c(h), c(0.0), c(0.0), c(h)], tol()).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(concurrence(&[c(1.0), c(1.0), c(0.0), c(0.0)], tol()), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn concurrence_matches_reduced_purity() {
        // oracle: C^2 = 2 (1 - tr rho_A^2) for pure states
        for i in 0..orbit().len() {
            let cc = concurrence(orbit().ket(i), tol()).unwrap();
            let p = purity(&reduce_first(orbit().projector(i)));
            assert!((cc * cc - 2.0 * (1.0 - p)).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_state_gbv_norm_is_three() {
        for basis in [Basis::Product, Basis::Bell] {
            for r in orbit().projectors() {
                let g = Gbv::from_density(&in_basis(r, basis), tol()).unwrap();
                assert!((g.norm_sq() - 3.0).abs() < 1e-9);
                assert!(g.to_density().max_abs_diff(&in_basis(r, basis)) < 1e-12);
            }
        }
    }

    #[test]
    fn predicted_vectors_are_pure_when_physical() {
        // every constraint-satisfying table entry has the norm of a pure state
        for basis in [Basis::Product, Basis::Bell] {
            for class in [1, 2] {
                for p in SignPattern::all(class, basis).iter().filter(|p| p.satisfies_constraint()) {
                    assert!((p.predicted().norm_sq() - 3.0).abs() < 1e-12, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn product_basis_classes_and_sign_table() {
        let a = TwoQubitAnalysis::compute(orbit(), Basis::Product, tol()).unwrap();
        assert_eq!(a.class_counts(), BTreeMap::from([(1, 128), (2, 128)]));
        for s in &a.sics {
            assert_eq!(s.classes, vec![if s.label <= 8 { 1 } else { 2 }]);
            assert!((s.avg_purity - 0.8).abs() < 1e-9);
        }
        assert!(a.reproduces_sign_table());
        let got: Vec<(i8, i8, i8)> = a.sics.iter().map(|s| (s.signs[0].h1, s.signs[0].h2, s.signs[0].h3)).collect();
        let table = [
            (-1, 1, -1),
            (-1, 1, 1),
            (-1, -1, 1),
            (-1, -1, -1),
            (1, 1, -1),
            (1, 1, 1),
            (1, -1, 1),
            (1, -1, -1),
        ];
        let expected: Vec<(i8, i8, i8)> = table.iter().chain(table[4..].iter()).chain(table[..4].iter()).copied().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn bell_basis_reproduces_same_signs() {
        let p = TwoQubitAnalysis::compute(orbit(), Basis::Bell, tol()).unwrap();
        assert_eq!(p.class_counts(), BTreeMap::from([(1, 128), (2, 128)]));
        assert!(p.reproduces_sign_table());
        for s in &p.sics {
            assert!((s.avg_purity - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn fiducial_pattern_regression() {
        let g = Gbv::from_density(orbit().projector(0), tol()).unwrap();
        let p = match_sign_pattern(&g, Basis::Product, PATTERN_TOL).unwrap().unwrap();
        assert_eq!(p.class_id, 1);
        assert!(p.satisfies_constraint());
        assert_eq!(sign_functions(&p), SignFunctions { h1: -1, h2: 1, h3: -1 });
    }

    #[test]
    fn concurrence_census_product_and_bell() {
        let g = SicConstants::new().g;
        let low = ((2.0 - 2.0 * g.sqrt()) / 5.0).sqrt();
        let mid = (2.0f64 / 5.0).sqrt();
        let high = ((2.0 + 2.0 * g.sqrt()) / 5.0).sqrt();
        for label in 1..=16 {
            let prod = concurrence_census(orbit(), label, Basis::Product).unwrap();
            let bell = concurrence_census(orbit(), label, Basis::Bell).unwrap();
            let (first, second) = if label <= 8 { (&prod, &bell) } else { (&bell, &prod) };
            assert_eq!(first.count_near(mid, 1e-9), 16, "label {label}");
            assert_eq!(second.count_near(high, 1e-9), 8, "label {label}");
            assert_eq!(second.count_near(low, 1e-9), 8, "label {label}");
        }
        assert!((mid - 0.632456).abs() < 1e-6);
    }

    #[test]
    fn purity_formula_two_qubits() {
        assert!((purity_formula(2, 2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn reduced_states_and_cube() {
        let r = reduced_state_census(orbit(), 1, Basis::Product, 1e-7).unwrap();
        assert_eq!(r.first.points.len(), 8);
        assert!(r.first.multiplicities.iter().all(|&m| m == 2));
        assert_eq!(r.second.points.len(), 8);
        assert!(r.second.multiplicities.iter().all(|&m| m == 2));
        let cube = r.second.cube.expect("cube");
        // |r|^2 = 3/5 puts the vertices on a sphere of radius sqrt(3/5)
        assert!((cube.edge - 2.0 / 5f64.sqrt()).abs() < 1e-9);
        for label in 1..=8 {
            let r = reduced_state_census(orbit(), label, Basis::Product, 1e-7).unwrap();
            assert!(r.second.cube.is_some(), "label {label}");
        }
    }

    #[test]
    fn cube_detector_rejects_non_cube() {
        let mut pts: Vec<[f64; 3]> = (0..8).map(|m| [(m & 1) as f64, (m >> 1 & 1) as f64, (m >> 2 & 1) as f64]).collect();
        assert!(detect_cube(&pts, 1e-9).is_some());
        pts[7] = [1.0, 1.0, 1.5];
        assert!(detect_cube(&pts, 1e-9).is_none());
    }

    #[test]
    fn partial_transpose_is_involution() {
        let rho = orbit().projector(5);
        let pt = partial_transpose(rho).unwrap();
        assert!(partial_transpose(&pt).unwrap().max_abs_diff(rho) < 1e-15);
        // oracle: explicit index swap on the 4-index tensor
        for (r, cc) in (0..16).map(|n| (n / 4, n % 4)) {
            let (i, j, k, l) = (r / 2, r % 2, cc / 2, cc % 2);
            assert_eq!(pt[(2 * i + j, 2 * k + l)], rho[(2 * i + l, 2 * k + j)]);
        }
    }

    #[test]
    fn violating_patterns_form_simplices() {
        let v = violating_patterns();
        assert_eq!(v.len(), 128);
        let checks: Vec<SimplexCheck> =
            v.par_iter().map(|p| partial_transpose_simplex_check(orbit(), p, tol()).unwrap()).collect();
        for c in &checks {
            assert!(c.holds(1e-9), "{c:?}");
        }
    }

    #[test]
    fn flipped_beta3_of_fiducial_fails_positivity() {
        let g = Gbv::from_density(orbit().projector(0), tol()).unwrap();
        let mut p = match_sign_pattern(&g, Basis::Product, PATTERN_TOL).unwrap().unwrap();
        assert!(matches!(partial_transpose_simplex_check(orbit(), &p, tol()), Err(Error::ConstraintSatisfied)));
        p.beta[2] = -p.beta[2];
        let c = partial_transpose_simplex_check(orbit(), &p, tol()).unwrap();
        assert!(c.min_eigenvalue < -1e-3);
        assert!(c.holds(1e-9));
    }

    #[test]
    fn schmidt_rank_separates_local_from_nonlocal() {
        let zz = pauli(3).kron(&pauli(1));
        assert_eq!(operator_schmidt_rank(&zz, 1e-9).unwrap(), 1);
        let x = displacement(DisplacementIndex::new(1, 0, 4), 4);
        assert!(operator_schmidt_rank(&x, 1e-9).unwrap() > 1);
        let cnot = ComplexMatrix::from_fn(4, |r, cc| c([[1., 0., 0., 0.], [0., 1., 0., 0.], [0., 0., 0., 1.], [0., 0., 1., 0.]][r][cc]));
        assert_eq!(operator_schmidt_rank(&cnot, 1e-9).unwrap(), 2);
    }

    #[test]
    fn basis_parsing() {
        assert_eq!("Bell".parse::<Basis>().unwrap(), Basis::Bell);
        assert!("foo".parse::<Basis>().is_err());
        assert_eq!(Basis::Product.to_string(), "product");
    }
}
