//! Recovering the displacement group from a bare SIC through the spectra of
//! sums of four of its states.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford_group::CliffordGroup;
use crate::error::{Error, Result};
use crate::finite_group::FiniteGroup;
use crate::numerics::{eig_hermitian, ComplexMatrix, Tolerance, C64};
use crate::sic_orbits::{FiducialOrbit, DIM, SIC_SIZE};
use crate::weyl_heisenberg::{displacement, omega, verify_sic, DisplacementIndex, SicConstants, SicPovm};

/// Matching tolerance for spectra computed from numerically generated states.
pub const SIGNATURE_TOL: f64 = 1e-8;

/// Sorted eigenvalues of a sum of four states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigSignature {
    pub lambdas: [f64; 4],
}

impl EigSignature {
    pub fn from_unsorted(mut lambdas: [f64; 4]) -> Self {
        lambdas.sort_by(f64::total_cmp);
        Self { lambdas }
    }

    pub fn sum(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn matches(&self, other: &Self, tol: f64) -> bool {
        self.lambdas.iter().zip(&other.lambdas).all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// `lambda_0 .. lambda_3` in the order attached to the eigenkets `e_0 .. e_3`
/// of `sum_j Z^j rho_f Z^-j`; `lambda_k` belongs to the `i^k` eigenspace of
/// `Z`.
pub fn reference_lambdas() -> [f64; 4] {
    let g = SicConstants::new().g;
    let s5 = 5f64.sqrt();
    let s2 = 2f64.sqrt();
    let mid = 2.0 / (s5 * g);
    let off = (2.0 / (5.0 * g)).sqrt();
    [(2.0 + s2) * g / s5, mid + off, (2.0 - s2) * g / s5, mid - off]
}

pub fn reference_signature() -> EigSignature {
    EigSignature::from_unsorted(reference_lambdas())
}

fn sum_states<'a>(states: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    states.into_iter().fold(ComplexMatrix::zeros(DIM), |acc, r| &acc + r)
}

/// Sorted spectrum of the sum of four states.
pub fn quad_signature(states: &[&ComplexMatrix], tol: Tolerance) -> Result<EigSignature> {
    if states.len() != 4 {
        return Err(Error::WrongCardinality { expected: 4, found: states.len() });
    }
    let eig = eig_hermitian(&sum_states(states.iter().copied()), tol)?;
    Ok(EigSignature::from_unsorted([eig.values[0], eig.values[1], eig.values[2], eig.values[3]]))
}

/// Builds `sum_k i^{sigma(k)} |e'_k><e'_k|` from the eigenkets of the sum of
/// four states, where `e'_k` belongs to `lambda_k` and `sigma` is one of the
/// eight symmetries of the 4-cycle. `None` if the spectrum is not the
/// reference one.
fn cyclic_operator(quad: &[&ComplexMatrix], variant: usize, tol: Tolerance) -> Result<Option<ComplexMatrix>> {
    let eig = eig_hermitian(&sum_states(quad.iter().copied()), tol)?;
    let reference = reference_lambdas();
    let sig = EigSignature::from_unsorted([eig.values[0], eig.values[1], eig.values[2], eig.values[3]]);
    if !sig.matches(&reference_signature(), SIGNATURE_TOL) {
        return Ok(None);
    }
    let (shift, flip) = (variant % 4, variant >= 4);
    let mut out = ComplexMatrix::zeros(DIM);
    for (k, &lambda) in reference.iter().enumerate() {
        let pos = eig
            .values
            .iter()
            .position(|v| (v - lambda).abs() <= SIGNATURE_TOL)
            .expect("signature matched");
        let power = if flip { (4 - k + shift) % 4 } else { (k + shift) % 4 };
        let phase = C64::i().powu(power as u32);
        out = &out + &ComplexMatrix::outer(&eig.vectors[pos]).scale(phase);
    }
    Ok(Some(out))
}

fn find_state(states: &[ComplexMatrix], rho: &ComplexMatrix) -> Option<usize> {
    states.iter().position(|s| s.max_abs_diff(rho) < 1e-6)
}

/// Permutation of `states` induced by conjugation with the unitary `u`.
fn unitary_permutation(states: &[ComplexMatrix], u: &ComplexMatrix) -> Option<Vec<usize>> {
    states.iter().map(|r| find_state(states, &u.conjugate(r))).collect()
}

fn combinations4(n: usize) -> impl Iterator<Item = [usize; 4]> {
    (0..n).flat_map(move |a| {
        (a + 1..n).flat_map(move |b| (b + 1..n).flat_map(move |c| (c + 1..n).map(move |d| [a, b, c, d])))
    })
}

/// Output of the three-step reconstruction.
#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    /// Positions (in the input SIC) of the quadruple defining `Z'`.
    pub z_quad: [usize; 4],
    /// Positions of the quadruple defining `X'`.
    pub x_quad: [usize; 4],
    pub z_prime: ComplexMatrix,
    pub x_prime: ComplexMatrix,
    /// `X'^a Z'^b` at index `4a + b`.
    pub group: Vec<ComplexMatrix>,
    /// Scalar `Z' X' Z'^-1 X'^-1`.
    pub commutator: C64,
    pub covariant: bool,
}

/// Rebuilds the displacement group under which `sic` is covariant.
pub fn reconstruct_hw(sic: &SicPovm, tol: Tolerance) -> Result<Reconstruction> {
    let report = verify_sic(&sic.states, DIM, tol)?;
    if !report.is_sic {
        return Err(Error::VerificationFailed("input is not a SIC".into()));
    }
    let states = &sic.states;

    // step 1: first quadruple (lexicographic) with the reference spectrum
    let (z_quad, z_prime) = combinations4(SIC_SIZE)
        .find_map(|q| {
            let quad: Vec<&ComplexMatrix> = q.iter().map(|&i| &states[i]).collect();
            cyclic_operator(&quad, 0, tol).ok().flatten().map(|z| (q, z))
        })
        .ok_or(Error::NoQualifyingSubset("no quadruple has the reference spectrum"))?;

    // step 2: Z' orbits, then one state per orbit
    let perm = unitary_permutation(states, &z_prime)
        .ok_or(Error::NoQualifyingSubset("Z' does not permute the SIC"))?;
    let mut orbits: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; states.len()];
    for start in 0..states.len() {
        if seen[start] {
            continue;
        }
        let mut orbit = Vec::new();
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            orbit.push(x);
            x = perm[x];
        }
        if orbit.len() != 4 {
            return Err(Error::NoQualifyingSubset("Z' orbits do not have length 4"));
        }
        orbits.push(orbit);
    }
    let z_inv = z_prime.adjoint();
    let w = omega(DIM);
    let mut found = None;
    'search: for sel in 0..256usize {
        let mut quad_idx = [0usize; 4];
        for (o, slot) in quad_idx.iter_mut().enumerate() {
            *slot = orbits[o][(sel >> (2 * (3 - o))) & 3];
        }
        let quad: Vec<&ComplexMatrix> = quad_idx.iter().map(|&i| &states[i]).collect();
        for variant in 0..8 {
            let Some(x) = cyclic_operator(&quad, variant, tol)? else { continue 'search };
            let comm = &(&(&z_prime * &x) * &z_inv) * &x.adjoint();
            if comm.max_abs_diff(&ComplexMatrix::identity(DIM).scale(w)) <= 1e-7 {
                let mut sorted = quad_idx;
                sorted.sort();
                found = Some((sorted, x, comm[(0, 0)]));
                break 'search;
            }
        }
    }
    let (x_quad, x_prime, commutator) =
        found.ok_or(Error::NoQualifyingSubset("no quadruple yields an X' with the Weyl commutation"))?;

    // step 3: the group generated by X' and Z'
    let mut group = Vec::with_capacity(16);
    for a in 0..4 {
        for b in 0..4 {
            group.push(&x_prime.pow(a) * &z_prime.pow(b));
        }
    }
    let covariant = group.iter().all(|g| unitary_permutation(states, g).is_some());
    Ok(Reconstruction { z_quad, x_quad, z_prime, x_prime, group, commutator, covariant })
}

/// Equality of two sets of unitaries up to per-element phases.
pub fn projective_set_eq(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> bool {
    let ka: BTreeSet<Vec<i64>> = a.iter().map(|m| m.projective_key()).collect();
    let kb: BTreeSet<Vec<i64>> = b.iter().map(|m| m.projective_key()).collect();
    ka.len() == a.len() && ka == kb
}

/// The displacement operators `D_p`, `p` in lexicographic order.
pub fn standard_group() -> Vec<ComplexMatrix> {
    DisplacementIndex::all(DIM).map(|p| displacement(p, DIM)).collect()
}

/// Exhaustive scan of the 1820 quadruples of one SIC in the orbit.
#[derive(Clone, Debug, Serialize)]
pub struct SignatureScan {
    /// Distinct spectra (rounded at 1e-7) and their counts.
    pub signatures: Vec<(EigSignature, usize)>,
    pub matching: usize,
    /// Matching quadruples are exactly the orbits `{q + j p}` with `p` of
    /// order 4.
    pub matching_are_order4_orbits: bool,
    /// Along the eigenphases of the connecting displacement, `lambda_0` sits
    /// opposite `lambda_2` (and `lambda_1` opposite `lambda_3`) in every
    /// matching quadruple.
    pub adjacency_rule_holds: bool,
}

fn order4_orbits() -> BTreeSet<[usize; 4]> {
    let mut out = BTreeSet::new();
    for a in DisplacementIndex::all(DIM) {
        for p in DisplacementIndex::all(DIM) {
            // order 4 in Z_4^2 means some component is odd
            if p.p1 % 2 == 0 && p.p2 % 2 == 0 {
                continue;
            }
            let mut q: [usize; 4] = std::array::from_fn(|j| a.add(p.scale(j as i64, DIM), DIM).linear(DIM));
            q.sort();
            out.insert(q);
        }
    }
    out
}

pub fn signature_scan(orbit: &FiducialOrbit, label: usize, tol: Tolerance) -> Result<SignatureScan> {
    let states = orbit.sic_states(label)?;
    let quads: Vec<[usize; 4]> = combinations4(SIC_SIZE).collect();
    let sigs: Vec<EigSignature> = quads
        .par_iter()
        .map(|q| quad_signature(&q.iter().map(|&i| &states[i]).collect::<Vec<_>>(), tol))
        .collect::<Result<_>>()?;
    let reference = reference_signature();
    let mut distinct: Vec<(EigSignature, usize)> = Vec::new();
    for s in &sigs {
        match distinct.iter_mut().find(|(t, _)| t.matches(s, 1e-7)) {
            Some(entry) => entry.1 += 1,
            None => distinct.push((*s, 1)),
        }
    }
    distinct.sort_by(|a, b| a.0.lambdas.partial_cmp(&b.0.lambdas).expect("finite"));
    let matching: BTreeSet<[usize; 4]> =
        quads.iter().zip(&sigs).filter(|(_, s)| s.matches(&reference, SIGNATURE_TOL)).map(|(q, _)| *q).collect();
    let orbits4 = order4_orbits();

    let lambdas = reference_lambdas();
    let adjacency_rule_holds = matching.iter().all(|q| {
        let Some(p) = connecting_step(q) else { return false };
        let dp = displacement(p, DIM);
        let Ok(eig) = eig_hermitian(&sum_states(q.iter().map(|&i| &states[i])), tol) else { return false };
        // eigenphase position (mod 4, relative to the first eigenket) of each label
        let phases: Vec<f64> = eig.vectors.iter().map(|v| {
            let z: C64 = v.iter().zip(dp.apply(v).expect("dim 4")).map(|(a, b)| a.conj() * b).sum();
            z.arg()
        }).collect();
        let label_of = |k: usize| lambdas.iter().position(|l| (l - eig.values[k]).abs() <= SIGNATURE_TOL);
        let pos = |k: usize| ((phases[k] - phases[0]) / (std::f64::consts::PI / 2.0)).round().rem_euclid(4.0) as usize;
        let mut by_pos = [usize::MAX; 4];
        for k in 0..4 {
            match label_of(k) {
                Some(l) => by_pos[pos(k)] = l,
                None => return false,
            }
        }
        by_pos.iter().all(|&l| l < 4) && (0..4).all(|m| (by_pos[m] + 2) % 4 == by_pos[(m + 2) % 4])
    });

    Ok(SignatureScan {
        signatures: distinct,
        matching: matching.len(),
        matching_are_order4_orbits: matching == orbits4,
        adjacency_rule_holds,
    })
}

/// Displacement `p` of order 4 with `q = {a + j p}`, if any.
fn connecting_step(q: &[usize; 4]) -> Option<DisplacementIndex> {
    let set: BTreeSet<usize> = q.iter().copied().collect();
    let a = DisplacementIndex::from_linear(q[0], DIM);
    DisplacementIndex::all(DIM).filter(|p| p.p1 % 2 == 1 || p.p2 % 2 == 1).find(|&p| {
        (0..4).map(|j| a.add(p.scale(j, DIM), DIM).linear(DIM)).collect::<BTreeSet<_>>() == set
    })
}

/// Whether the projective symmetry group of `states` inside the Clifford
/// group has a single subgroup of order 16. Every such subgroup consists of
/// elements of 2-power order, so it is unique exactly when those elements
/// number 16 and are closed.
pub fn uniqueness_check(group: &CliffordGroup, states: &[ComplexMatrix]) -> Result<UniquenessReport> {
    let perms: Vec<Vec<usize>> = group
        .elements()
        .par_iter()
        .filter(|e| !e.op.antiunitary)
        .filter_map(|e| unitary_permutation(states, &e.op.matrix))
        .collect();
    let g = FiniteGroup::from_elements(&perms, |p, q| q.iter().map(|&i| p[i]).collect::<Vec<usize>>(), |p| p.clone())?;
    let two: BTreeSet<usize> = (0..g.order()).filter(|&a| g.element_order(a).is_power_of_two()).collect();
    let unique = two.len() == 16 && g.is_subgroup(&two);
    Ok(UniquenessReport { symmetry_order: g.order(), two_elements: two.len(), unique })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub symmetry_order: usize,
    pub two_elements: usize,
    pub unique: bool,
}
