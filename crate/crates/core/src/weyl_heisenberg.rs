//! Displacement operators, the analytic dimension-4 fiducial, and SIC
//! generation/verification.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, inner, norm, ComplexMatrix, Ket, Tolerance, C64};

/// Index `(p1, p2)` of the displacement operator `D_{p1,p2}`, reduced mod `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DisplacementIndex {
    pub p1: usize,
    pub p2: usize,
}

impl DisplacementIndex {
    /// Reduces arbitrary integers into `[0, d)`.
    pub fn new(p1: i64, p2: i64, d: usize) -> Self {
        let m = d as i64;
        Self { p1: p1.rem_euclid(m) as usize, p2: p2.rem_euclid(m) as usize }
    }

    /// Position in the lexicographic `(p1, p2)` order used for SIC states.
    pub fn linear(self, d: usize) -> usize {
        self.p1 * d + self.p2
    }

    pub fn from_linear(k: usize, d: usize) -> Self {
        Self { p1: k / d, p2: k % d }
    }

    pub fn all(d: usize) -> impl Iterator<Item = Self> {
        (0..d * d).map(move |k| Self::from_linear(k, d))
    }

    pub fn is_zero(self) -> bool {
        self.p1 == 0 && self.p2 == 0
    }

    pub fn add(self, other: Self, d: usize) -> Self {
        Self::new((self.p1 + other.p1) as i64, (self.p2 + other.p2) as i64, d)
    }

    pub fn neg(self, d: usize) -> Self {
        Self::new(-(self.p1 as i64), -(self.p2 as i64), d)
    }

    pub fn scale(self, k: i64, d: usize) -> Self {
        Self::new(k * self.p1 as i64, k * self.p2 as i64, d)
    }
}

impl std::fmt::Display for DisplacementIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.p1, self.p2)
    }
}

/// `d` if odd, `2d` if even.
pub fn d_bar(d: usize) -> usize {
    if d % 2 == 0 {
        2 * d
    } else {
        d
    }
}

pub fn omega(d: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI / d as f64)
}

/// `-e^{i pi / d}`; a primitive `d_bar`-th root of unity with `tau^2 = omega`.
pub fn tau(d: usize) -> C64 {
    -C64::from_polar(1.0, PI / d as f64)
}

/// `tau^k` with the exponent reduced mod `d_bar`, avoiding repeated
/// multiplication roundoff.
pub fn tau_pow(k: i64, d: usize) -> C64 {
    let db = d_bar(d) as i64;
    let k = k.rem_euclid(db);
    // tau = e^{i pi (d+1)/d}
    C64::from_polar(1.0, PI * ((d as i64 + 1) * k) as f64 / d as f64)
}

pub fn omega_pow(k: i64, d: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k.rem_euclid(d as i64) as f64 / d as f64)
}

/// Cyclic shift `X|e_r> = |e_{r+1}>`.
pub fn shift(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, |r, c| if r == (c + 1) % d { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Phase operator `Z|e_r> = omega^r |e_r>`.
pub fn phase(d: usize) -> ComplexMatrix {
    let diag: Vec<C64> = (0..d).map(|r| omega_pow(r as i64, d)).collect();
    ComplexMatrix::diagonal(&diag)
}

/// `D_p = tau^{p1 p2} X^{p1} Z^{p2}`.
pub fn displacement(idx: DisplacementIndex, d: usize) -> ComplexMatrix {
    displacement_lifted(idx.p1 as i64, idx.p2 as i64, d)
}

/// Displacement with integer (unreduced) indices. The phase `tau^{p1 p2}` is
/// taken mod `d_bar`, so `D_{p + d q}` can differ from `D_p` by a sign when `d`
/// is even; this is the convention under which the Clifford conjugation law
/// holds with exact phases.
pub fn displacement_lifted(p1: i64, p2: i64, d: usize) -> ComplexMatrix {
    let m = d as i64;
    let (r1, r2) = (p1.rem_euclid(m) as usize, p2.rem_euclid(m) as usize);
    let prefactor = tau_pow(p1 * p2, d);
    // (X^{r1} Z^{r2})[row, col] = omega^{r2 col} if row = col + r1
    ComplexMatrix::from_fn(d, |row, col| {
        if row == (col + r1) % d {
            prefactor * omega_pow((r2 * col) as i64, d)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `<p, q> = p2 q1 - p1 q2`.
pub fn symplectic_form(p: DisplacementIndex, q: DisplacementIndex) -> i64 {
    p.p2 as i64 * q.p1 as i64 - p.p1 as i64 * q.p2 as i64
}

/// Checks `D_p D_q = tau^{<p,q>} D_{p+q}` for every pair, with `p + q` taken as
/// an integer vector (see [`displacement_lifted`]).
pub fn weyl_commutation_check(d: usize, tol: Tolerance) -> bool {
    let ops: Vec<_> = DisplacementIndex::all(d).map(|p| displacement(p, d)).collect();
    DisplacementIndex::all(d).all(|p| {
        DisplacementIndex::all(d).all(|q| {
            let lhs = &ops[p.linear(d)] * &ops[q.linear(d)];
            let sum = displacement_lifted((p.p1 + q.p1) as i64, (p.p2 + q.p2) as i64, d);
            let rhs = sum.scale(tau_pow(symplectic_form(p, q), d));
            lhs.max_abs_diff(&rhs) <= tol.abs()
        })
    })
}

/// Golden-ratio constants for the dimension-4 fiducials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SicConstants {
    /// `(sqrt 5 - 1) / 2`
    pub g: f64,
    /// `1 / sqrt 5`
    pub b: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
}

impl SicConstants {
    pub fn new() -> Self {
        let s5 = 5f64.sqrt();
        let g = (s5 - 1.0) / 2.0;
        Self {
            g,
            b: 1.0 / s5,
            a_plus: (1.0 + g.sqrt()).sqrt() / s5,
            a_minus: (1.0 - g.sqrt()).sqrt() / s5,
            g_plus: (1.0 + g).sqrt() / s5,
            g_minus: (1.0 - g).sqrt() / s5,
        }
    }

    /// `A_{+}` for a positive sign, `A_{-}` otherwise.
    pub fn a(&self, sign: i8) -> f64 {
        if sign > 0 {
            self.a_plus
        } else {
            self.a_minus
        }
    }

    /// `G_{+}` for a positive sign, `G_{-}` otherwise.
    pub fn gs(&self, sign: i8) -> f64 {
        if sign > 0 {
            self.g_plus
        } else {
            self.g_minus
        }
    }
}

impl Default for SicConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// The analytic fiducial ket in dimension 4.
pub fn fiducial_ket_d4() -> Ket {
    let g = SicConstants::new().g;
    let e = |x: f64| C64::from_polar(1.0, x);
    let ig = C64::new(0.0, g.powf(-1.5));
    let one = C64::new(1.0, 0.0);
    let norm = 1.0 / (2.0 * (3.0 + g).sqrt());
    vec![
        (one + e(-PI / 4.0)) * norm,
        (e(PI / 4.0) + ig) * norm,
        (one - e(-PI / 4.0)) * norm,
        (e(PI / 4.0) - ig) * norm,
    ]
}

fn check_normalized(v: &[C64], tol: Tolerance) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > tol.abs() {
        Err(Error::NotNormalized(n))
    } else {
        Ok(())
    }
}

/// `| |<v|D_p|v>| - 1/sqrt(d+1) | <= tol` for every nonzero `p`.
pub fn is_fiducial(v: &[C64], d: usize, tol: Tolerance) -> Result<bool> {
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
    }
    check_normalized(v, tol)?;
    let target = 1.0 / ((d + 1) as f64).sqrt();
    for p in DisplacementIndex::all(d).filter(|p| !p.is_zero()) {
        let dv = displacement(p, d).apply(v)?;
        if (inner(v, &dv).norm() - target).abs() > tol.abs() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `d^2` rank-one trace-one states with pairwise fidelity `1/(d+1)`. The POVM
/// elements are `states[j] / d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SicPovm {
    pub d: usize,
    #[serde(default)]
    pub label: Option<String>,
    pub states: Vec<ComplexMatrix>,
}

impl SicPovm {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Orbit of `|v><v|` under the displacement operators, ordered by `(p1, p2)`.
pub fn generate_sic(v: &[C64], d: usize, tol: Tolerance) -> Result<SicPovm> {
    if !is_fiducial(v, d, tol)? {
        return Err(Error::NotFiducial);
    }
    let states = DisplacementIndex::all(d)
        .map(|p| {
            let w = displacement(p, d).apply(v).expect("dimension checked");
            ComplexMatrix::outer(&w)
        })
        .collect();
    Ok(SicPovm { d, label: None, states })
}

/// Outcome of [`verify_sic`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SicReport {
    /// `max_{j != k} |tr(rho_j rho_k) - 1/(d+1)|`
    pub max_fidelity_deviation: f64,
    pub max_trace_deviation: f64,
    pub max_hermiticity_deviation: f64,
    /// Largest distance of a spectrum from `{1, 0, ..., 0}`.
    pub max_rank_one_deviation: f64,
    /// `max |sum_j rho_j / d - I|`
    pub completeness_deviation: f64,
    pub is_sic: bool,
}

pub fn verify_sic(states: &[ComplexMatrix], d: usize, tol: Tolerance) -> Result<SicReport> {
    if states.len() != d * d {
        return Err(Error::WrongCardinality { expected: d * d, found: states.len() });
    }
    if let Some(bad) = states.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
    }
    let target = 1.0 / (d + 1) as f64;
    let mut fid_dev: f64 = 0.0;
    for j in 0..states.len() {
        for k in (j + 1)..states.len() {
            let f = states[j].trace_product(&states[k]);
            fid_dev = fid_dev.max((f - C64::new(target, 0.0)).norm());
        }
    }
    let mut trace_dev: f64 = 0.0;
    let mut herm_dev: f64 = 0.0;
    let mut rank_dev: f64 = 0.0;
    let mut sum = ComplexMatrix::zeros(d);
    for s in states {
        trace_dev = trace_dev.max((s.trace() - C64::new(1.0, 0.0)).norm());
        let h = s.hermiticity_deviation();
        herm_dev = herm_dev.max(h);
        // the spectrum test needs a Hermitian input; a non-Hermitian state has
        // already failed
        rank_dev = rank_dev.max(match eig_hermitian(s, Tolerance::new(h.max(1e-300) * 2.0)?) {
            Ok(eig) => {
                let n = eig.values.len();
                eig.values
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| if k + 1 == n { (l - 1.0).abs() } else { l.abs() })
                    .fold(0.0, f64::max)
            }
            Err(_) => f64::INFINITY,
        });
        sum = &sum + s;
    }
    let completeness = sum.scale(C64::new(1.0 / d as f64, 0.0)).max_abs_diff(&ComplexMatrix::identity(d));
    let t = tol.abs();
    let is_sic = fid_dev <= t && trace_dev <= t && herm_dev <= t && rank_dev <= t && completeness <= t;
    Ok(SicReport {
        max_fidelity_deviation: fid_dev,
        max_trace_deviation: trace_dev,
        max_hermiticity_deviation: herm_dev,
        max_rank_one_deviation: rank_dev,
        completeness_deviation: completeness,
        is_sic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn displacement_small_cases() {
        let d = 4;
        let id = displacement(DisplacementIndex::new(0, 0, d), d);
        assert!(id.max_abs_diff(&ComplexMatrix::identity(d)) < 1e-15);
        let x = displacement(DisplacementIndex::new(1, 0, d), d);
        assert!(x.max_abs_diff(&shift(d)) < 1e-15);
        // <e_1| D_{1,1} |e_0> = tau * <e_1|X Z|e_0> = tau
        let d11 = displacement(DisplacementIndex::new(1, 1, d), d);
        let by_hand = (&shift(d) * &phase(d)).scale(tau(d));
        assert!(d11.max_abs_diff(&by_hand) < 1e-15);
        let want = -C64::from_polar(1.0, PI / 4.0);
        assert!((d11[(1, 0)] - want).norm() < 1e-15);
    }

    #[test]
    fn tau_squares_to_omega() {
        for d in 2..7 {
            assert!((tau(d) * tau(d) - omega(d)).norm() < 1e-14);
            assert!((tau_pow(d_bar(d) as i64, d) - C64::new(1.0, 0.0)).norm() < 1e-14);
            assert!((tau_pow(3, d) - tau(d) * tau(d) * tau(d)).norm() < 1e-14);
        }
    }

    #[test]
    fn shift_and_phase_have_order_d() {
        for d in [2, 3, 4] {
            assert!(shift(d).pow(d).max_abs_diff(&ComplexMatrix::identity(d)) < 1e-14);
            assert!(phase(d).pow(d).max_abs_diff(&ComplexMatrix::identity(d)) < 1e-14);
        }
    }

    #[test]
    fn weyl_commutation_holds() {
        assert!(weyl_commutation_check(2, tol()));
        assert!(weyl_commutation_check(3, tol()));
        assert!(weyl_commutation_check(4, tol()));
        assert!(weyl_commutation_check(5, tol()));
    }

    #[test]
    fn adjoint_is_projectively_negated_index() {
        for d in [2, 3, 4] {
            for p in DisplacementIndex::all(d) {
                let adj = displacement(p, d).adjoint();
                let neg = displacement(p.neg(d), d);
                assert!(crate::numerics::proj_equal(&adj, &neg, tol()).unwrap());
            }
        }
    }

    #[test]
    fn hilbert_schmidt_orthogonality() {
        let d = 4;
        for p in DisplacementIndex::all(d) {
            for q in DisplacementIndex::all(d) {
                let ip = displacement(p, d).hs_inner(&displacement(q, d));
                let want = if p == q { d as f64 } else { 0.0 };
                assert!((ip - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fiducial_first_component_and_norm() {
        let v = fiducial_ket_d4();
        let g = SicConstants::new().g;
        let want = (C64::new(1.0, 0.0) + C64::from_polar(1.0, -PI / 4.0)) / (2.0 * (3.0 + g).sqrt());
        assert!((v[0] - want).norm() < 1e-15);
        assert!((norm(&v) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fiducial_overlaps() {
        let v = fiducial_ket_d4();
        for p in DisplacementIndex::all(4).filter(|p| !p.is_zero()) {
            let dv = displacement(p, 4).apply(&v).unwrap();
            assert!((inner(&v, &dv).norm() - 5f64.sqrt().recip()).abs() < 1e-12);
        }
        assert!(is_fiducial(&v, 4, tol()).unwrap());
    }

    #[test]
    fn basis_ket_is_not_fiducial() {
        let mut e0 = vec![C64::new(0.0, 0.0); 4];
        e0[0] = C64::new(1.0, 0.0);
        assert!(!is_fiducial(&e0, 4, tol()).unwrap());
    }

    #[test]
    fn displaced_fiducial_is_fiducial() {
        let v = displacement(DisplacementIndex::new(2, 3, 4), 4).apply(&fiducial_ket_d4()).unwrap();
        assert!(is_fiducial(&v, 4, tol()).unwrap());
    }

    #[test]
    fn is_fiducial_rejects_unnormalized() {
        let v: Vec<C64> = fiducial_ket_d4().iter().map(|z| z * 2.0).collect();
        assert!(matches!(is_fiducial(&v, 4, tol()), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn generated_sic_verifies() {
        let v = fiducial_ket_d4();
        let sic = generate_sic(&v, 4, tol()).unwrap();
        assert_eq!(sic.len(), 16);
        assert!(sic.states[0].max_abs_diff(&ComplexMatrix::outer(&v)) < 1e-15);
        let report = verify_sic(&sic.states, 4, tol()).unwrap();
        assert!(report.is_sic, "{report:?}");
        assert!(report.max_fidelity_deviation < 1e-9);
        assert!(report.completeness_deviation < 1e-9);
    }

    #[test]
    fn generate_sic_rejects_non_fiducial() {
        let mut e0 = vec![C64::new(0.0, 0.0); 4];
        e0[0] = C64::new(1.0, 0.0);
        assert_eq!(generate_sic(&e0, 4, tol()), Err(Error::NotFiducial));
    }

    #[test]
    fn copies_of_one_state_are_not_a_sic() {
        let mut e0 = vec![C64::new(0.0, 0.0); 4];
        e0[0] = C64::new(1.0, 0.0);
        let states = vec![ComplexMatrix::outer(&e0); 16];
        let report = verify_sic(&states, 4, tol()).unwrap();
        assert!(!report.is_sic);
        assert!(report.max_fidelity_deviation > 0.7);
    }

    #[test]
    fn verify_sic_checks_cardinality() {
        let states = vec![ComplexMatrix::identity(4); 15];
        assert_eq!(verify_sic(&states, 4, tol()), Err(Error::WrongCardinality { expected: 16, found: 15 }));
    }

    #[test]
    fn constants_identities() {
        let k = SicConstants::new();
        assert!((k.a_plus.powi(2) + k.a_minus.powi(2) - 0.4).abs() < 1e-15);
        assert!((k.g_plus.powi(2) + k.g_minus.powi(2) - 0.4).abs() < 1e-15);
        assert!(k.a_minus > 0.0 && k.g_minus > 0.0);
    }

    #[test]
    fn qubit_sic_from_tetrahedron() {
        // d = 2: a standard tetrahedral fiducial
        let theta = (1.0 / 3f64.sqrt()).acos();
        let v = vec![
            C64::new((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), PI / 4.0),
        ];
        let sic = generate_sic(&v, 2, tol()).unwrap();
        assert!(verify_sic(&sic.states, 2, tol()).unwrap().is_sic);
    }
}
