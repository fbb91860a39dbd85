//! The 16 further SICs obtained by regrouping orbit states across a row, the
//! displacement group they are covariant under, and the unitary relating the
//! two families.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford_group::{to_operator, CliffordGroup, SymplecticPair};
use crate::error::{Error, Result};
use crate::numerics::{proj_equal, ComplexMatrix, Tolerance, C64};
use crate::sic_orbits::{label_row, FiducialOrbit, DIM, NUM_SICS, ORBIT_SIZE, SIC_SIZE};
use crate::weyl_heisenberg::{displacement, verify_sic, DisplacementIndex, SicPovm};

/// Tolerance for recognising the fidelity 1/5 between orbit states.
pub const FIDELITY_TOL: f64 = 1e-7;

/// `H = {I, X^2, Z^2, X^2 Z^2}` as displacement indices.
pub fn h_subgroup() -> [DisplacementIndex; 4] {
    [(0, 0), (2, 0), (0, 2), (2, 2)].map(|(a, b)| DisplacementIndex::new(a, b, DIM))
}

/// Four orbit states of one SIC related by `H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HOrbit {
    pub sic_label: usize,
    /// Orbit indices, ascending.
    pub members: [usize; 4],
}

/// The four `H` orbits of SIC `label`, ordered by smallest member.
pub fn h_orbits(orbit: &FiducialOrbit, label: usize) -> Result<Vec<HOrbit>> {
    orbit.sic_states(label)?;
    let base = (label - 1) * SIC_SIZE;
    let hs: Vec<ComplexMatrix> = h_subgroup().iter().map(|&h| displacement(h, DIM)).collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for i in base..base + SIC_SIZE {
        if seen.contains(&i) {
            continue;
        }
        let mut members = [0usize; 4];
        for (slot, h) in members.iter_mut().zip(&hs) {
            *slot = orbit.lookup(&h.conjugate(orbit.projector(i))).ok_or(Error::NotInOrbit)?;
        }
        members.sort();
        let distinct: BTreeSet<usize> = members.iter().copied().collect();
        if distinct.len() != 4 || members.iter().any(|&m| orbit.sic_label(m) != label) {
            return Err(Error::VerificationFailed(format!("H orbit of state {i} is degenerate")));
        }
        seen.extend(distinct);
        out.push(HOrbit { sic_label: label, members });
    }
    Ok(out)
}

fn fidelity(orbit: &FiducialOrbit, a: usize, b: usize) -> f64 {
    orbit.projector(a).trace_product(orbit.projector(b)).re
}

/// A SIC assembled from one `H` orbit in each SIC of a row.
#[derive(Clone, Debug, Serialize)]
pub struct RegroupedSic {
    /// Row (0-based) of the arrangement the states come from.
    pub row: usize,
    pub parts: Vec<HOrbit>,
    /// Orbit indices, ascending.
    pub members: Vec<usize>,
}

impl RegroupedSic {
    pub fn to_povm(&self, orbit: &FiducialOrbit) -> SicPovm {
        SicPovm {
            d: DIM,
            label: Some(format!("regrouped row {} from SIC {}", self.row + 1, self.parts[0].sic_label)),
            states: self.members.iter().map(|&i| orbit.projector(i).clone()).collect(),
        }
    }
}

/// Regroups the four SICs of one row; `labels` must be the row in order.
pub fn regroup_row(orbit: &FiducialOrbit, labels: [usize; 4], tol: Tolerance) -> Result<Vec<RegroupedSic>> {
    for &l in &labels {
        orbit.sic_states(l)?;
    }
    let row = label_row(labels[0]);
    if labels.iter().enumerate().any(|(c, &l)| l != 4 * row + c + 1) {
        return Err(Error::VerificationFailed(format!("labels {labels:?} are not a row")));
    }
    let per_sic: Vec<Vec<HOrbit>> = labels.iter().map(|&l| h_orbits(orbit, l)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for seed in &per_sic[0] {
        let mut parts = vec![seed.clone()];
        for candidates in &per_sic[1..] {
            let matching: Vec<&HOrbit> = candidates
                .iter()
                .filter(|o| {
                    seed.members.iter().all(|&a| o.members.iter().all(|&b| (fidelity(orbit, a, b) - 0.2).abs() <= FIDELITY_TOL))
                })
                .collect();
            if matching.len() != 1 {
                return Err(Error::VerificationFailed(format!(
                    "{} matching H orbits in SIC {} for seed {:?}",
                    matching.len(),
                    candidates[0].sic_label,
                    seed.members
                )));
            }
            parts.push(matching[0].clone());
        }
        let mut members: Vec<usize> = parts.iter().flat_map(|p| p.members).collect();
        members.sort();
        let sic = RegroupedSic { row, parts, members };
        if !verify_sic(&sic.to_povm(orbit).states, DIM, tol)?.is_sic {
            return Err(Error::VerificationFailed(format!("regrouped set {:?} is not a SIC", sic.members)));
        }
        out.push(sic);
    }
    Ok(out)
}

/// All 16 regrouped SICs, row by row.
pub fn regroup_all(orbit: &FiducialOrbit, tol: Tolerance) -> Result<Vec<RegroupedSic>> {
    let mut out = Vec::new();
    for row in 0..4 {
        out.extend(regroup_row(orbit, [4 * row + 1, 4 * row + 2, 4 * row + 3, 4 * row + 4], tol)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct Bits([u64; 4]);

impl Bits {
    fn empty() -> Self {
        Bits([0; 4])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(self, o: Self) -> Self {
        Bits(std::array::from_fn(|k| self.0[k] & o.0[k]))
    }

    fn count(self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bits strictly above `i`.
    fn above(i: usize) -> Self {
        Bits(std::array::from_fn(|k| {
            let lo = 64 * k;
            if i + 1 <= lo {
                u64::MAX
            } else if i + 1 >= lo + 64 {
                0
            } else {
                u64::MAX << (i + 1 - lo)
            }
        }))
    }

    fn iter(self) -> impl Iterator<Item = usize> {
        (0..4).flat_map(move |k| {
            let mut w = self.0[k];
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(64 * k + b)
            })
        })
    }
}

fn cliques(adj: &[Bits], candidates: Bits, size: usize) -> Vec<Vec<usize>> {
    fn rec(adj: &[Bits], clique: &mut Vec<usize>, p: Bits, size: usize, out: &mut Vec<Vec<usize>>) {
        if clique.len() == size {
            out.push(clique.clone());
            return;
        }
        if clique.len() + p.count() < size {
            return;
        }
        for v in p.iter() {
            clique.push(v);
            rec(adj, clique, p.and(adj[v]).and(Bits::above(v)), size, out);
            clique.pop();
        }
    }
    let mut out = Vec::new();
    rec(adj, &mut Vec::new(), candidates, size, &mut out);
    out
}

/// Clique census of the fidelity-1/5 graph on the orbit.
#[derive(Clone, Debug, Serialize)]
pub struct RegroupScan {
    /// Distinct vertex degrees (a single value when the graph is regular).
    pub degrees: Vec<usize>,
    /// 16-cliques inside each row's 64 states.
    pub per_row: [usize; 4],
    pub originals_found: usize,
    pub regrouped_found: usize,
    /// Cliques that are neither original nor regrouped SICs.
    pub others_found: usize,
    /// 16-cliques over all 256 states, when the full scan ran.
    pub full_total: Option<usize>,
    /// Every state lies in exactly two SICs (full scan only).
    pub each_state_in_two: Option<bool>,
}

impl RegroupScan {
    pub fn row_total(&self) -> usize {
        self.per_row.iter().sum()
    }
}

pub fn exhaustive_regroup_scan(orbit: &FiducialOrbit, full: bool, tol: Tolerance) -> Result<RegroupScan> {
    let n = orbit.len();
    let adj: Vec<Bits> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut b = Bits::empty();
            for j in 0..n {
                if j != i && (fidelity(orbit, i, j) - 0.2).abs() <= FIDELITY_TOL {
                    b.set(j);
                }
            }
            b
        })
        .collect();
    let degrees: Vec<usize> = adj.iter().map(|b| b.count()).collect::<BTreeSet<_>>().into_iter().collect();

    let originals: BTreeSet<Vec<usize>> =
        (0..NUM_SICS).map(|s| (s * SIC_SIZE..(s + 1) * SIC_SIZE).collect()).collect();
    let regrouped: BTreeSet<Vec<usize>> = regroup_all(orbit, tol)?.into_iter().map(|r| r.members).collect();

    let row_cliques: Vec<Vec<Vec<usize>>> = (0..4)
        .into_par_iter()
        .map(|r| {
            let mut cand = Bits::empty();
            for i in 64 * r..64 * (r + 1) {
                cand.set(i);
            }
            cliques(&adj, cand, SIC_SIZE)
        })
        .collect();
    let per_row: [usize; 4] = std::array::from_fn(|r| row_cliques[r].len());
    let all_row: Vec<&Vec<usize>> = row_cliques.iter().flatten().collect();
    let originals_found = all_row.iter().filter(|c| originals.contains(**c)).count();
    let regrouped_found = all_row.iter().filter(|c| regrouped.contains(**c)).count();
    let others_found = all_row.len() - originals_found - regrouped_found;

    let (full_total, each_state_in_two) = if full {
        let mut all = Bits::empty();
        for i in 0..n {
            all.set(i);
        }
        // split on the smallest vertex to run branches in parallel
        let found: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .flat_map_iter(|v| {
                let p = adj[v].and(Bits::above(v));
                cliques(&adj, p, SIC_SIZE - 1).into_iter().map(move |mut c| {
                    c.insert(0, v);
                    c
                })
            })
            .collect();
        let mut count = vec![0usize; n];
        for c in &found {
            for &v in c {
                count[v] += 1;
            }
        }
        (Some(found.len()), Some(count.iter().all(|&c| c == 2)))
    } else {
        (None, None)
    };

    Ok(RegroupScan { degrees, per_row, originals_found, regrouped_found, others_found, full_total, each_state_in_two })
}

/// Generators of the displacement group of the regrouped SICs, literally and
/// as symplectic pairs.
#[derive(Clone, Debug, Serialize)]
pub struct DPrime {
    pub x: ComplexMatrix,
    pub z: ComplexMatrix,
    pub x_pair: SymplecticPair,
    pub z_pair: SymplecticPair,
}

impl DPrime {
    /// `X'^a Z'^b` at index `4a + b`.
    pub fn group(&self) -> Vec<ComplexMatrix> {
        let mut out = Vec::with_capacity(16);
        for a in 0..4 {
            for b in 0..4 {
                out.push(&self.x.pow(a) * &self.z.pow(b));
            }
        }
        out
    }

    /// Scalar `Z' X' Z'^-1 X'^-1`.
    pub fn commutator(&self) -> C64 {
        (&(&(&self.z * &self.x) * &self.z.adjoint()) * &self.x.adjoint())[(0, 0)]
    }
}

pub fn dprime_generators() -> DPrime {
    let c = |re: f64, im: f64| C64::new(re, im);
    let z0 = c(0.0, 0.0);
    let x = ComplexMatrix::from_rows(&[
        vec![c(1.0, 0.0), z0, z0, z0],
        vec![z0, z0, z0, c(1.0, 0.0)],
        vec![z0, z0, c(-1.0, 0.0), z0],
        vec![z0, c(-1.0, 0.0), z0, z0],
    ])
    .expect("square");
    let (p, m) = (c(0.5, 0.5), c(-0.5, 0.5));
    let z = ComplexMatrix::from_rows(&[vec![z0, p, z0, m], vec![p, z0, m, z0], vec![z0, m, z0, p], vec![m, z0, p, z0]])
        .expect("square");
    DPrime {
        x,
        z,
        x_pair: SymplecticPair::new([[3, 0], [2, 3]], [0, 1], DIM).expect("det 1"),
        z_pair: SymplecticPair::new([[3, 2], [0, 3]], [3, 0], DIM).expect("det 1"),
    }
}

/// Unitary taking the standard displacement group to the regrouped one.
pub fn equivalence_unitary() -> ComplexMatrix {
    let c = |re: f64, im: f64| C64::new(re / 2.0, im / 2.0);
    let (one, mone, i, mi) = (c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0));
    ComplexMatrix::from_rows(&[
        vec![mi, mone, mi, mone],
        vec![one, mi, mone, i],
        vec![mi, one, mi, one],
        vec![one, i, mone, mi],
    ])
    .expect("square")
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub unitarity_deviation: f64,
    pub fixes_fiducial: bool,
    pub conjugates_d_to_dprime: bool,
    pub preserves_orbit: bool,
    /// Images of the 16 original SICs are exactly the 16 regrouped ones.
    pub maps_originals_to_regrouped: bool,
}

pub fn equivalence_report(orbit: &FiducialOrbit, tol: Tolerance) -> Result<EquivalenceReport> {
    let u = equivalence_unitary();
    let dp = dprime_generators();
    let image: Vec<ComplexMatrix> = DisplacementIndex::all(DIM).map(|p| u.conjugate(&displacement(p, DIM))).collect();
    let perm: Option<Vec<usize>> = (0..ORBIT_SIZE).map(|i| orbit.lookup(&u.conjugate(orbit.projector(i)))).collect();
    let regrouped: BTreeSet<Vec<usize>> = regroup_all(orbit, tol)?.into_iter().map(|r| r.members).collect();
    let maps = perm.as_ref().is_some_and(|perm| {
        let images: BTreeSet<Vec<usize>> = (0..NUM_SICS)
            .map(|s| {
                let mut m: Vec<usize> = (s * SIC_SIZE..(s + 1) * SIC_SIZE).map(|i| perm[i]).collect();
                m.sort();
                m
            })
            .collect();
        images == regrouped
    });
    Ok(EquivalenceReport {
        unitarity_deviation: u.unitarity_deviation(),
        fixes_fiducial: proj_equal(&u.conjugate(orbit.projector(0)), orbit.projector(0), tol)?,
        conjugates_d_to_dprime: crate::hw_reconstruction::projective_set_eq(&image, &dp.group()),
        preserves_orbit: perm.is_some(),
        maps_originals_to_regrouped: maps,
    })
}

/// Order-16 subgroups of the projective Clifford group generated by two
/// order-4 elements whose commutator is `+-i I`.
#[derive(Clone, Debug, Serialize)]
pub struct SubgroupCensus {
    pub order4_elements: usize,
    pub total: usize,
    pub normal: usize,
    pub normal_are_d_and_dprime: bool,
    pub u_in_clifford: bool,
    pub u_squared_in_clifford: bool,
    pub u_normalizes_clifford: bool,
}

pub fn hw_conjugate_subgroup_census(group: &CliffordGroup) -> Result<SubgroupCensus> {
    if group.is_extended() {
        return Err(Error::VerificationFailed("census runs on the unitary Clifford group".into()));
    }
    let table = group.table();
    let n = table.order();
    let order4: Vec<usize> = (0..n).filter(|&a| table.element_order(a) == 4).collect();
    let mats: Vec<&ComplexMatrix> = (0..n).map(|k| &group.element(k).op.matrix).collect();
    let i_id = ComplexMatrix::identity(DIM).scale(C64::i());
    let mi_id = ComplexMatrix::identity(DIM).scale(-C64::i());
    let subgroups: BTreeSet<BTreeSet<usize>> = order4
        .par_iter()
        .enumerate()
        .flat_map_iter(|(ia, &a)| {
            let mats = &mats;
            let (i_id, mi_id) = (&i_id, &mi_id);
            order4[ia + 1..].iter().filter_map(move |&b| {
                let comm = &(&(mats[a] * mats[b]) * &mats[a].adjoint()) * &mats[b].adjoint();
                if comm.max_abs_diff(i_id) > 1e-9 && comm.max_abs_diff(mi_id) > 1e-9 {
                    return None;
                }
                let s = table.closure(&[a, b]);
                (s.len() == 16).then_some(s)
            })
        })
        .collect();
    let normal: Vec<&BTreeSet<usize>> = subgroups.iter().filter(|s| table.is_normal(s)).collect();

    let to_set = |ms: &[ComplexMatrix]| -> Option<BTreeSet<usize>> {
        ms.iter().map(|m| group.lookup(&unit(m))).collect()
    };
    let d_set = to_set(&crate::hw_reconstruction::standard_group());
    let dp_set = to_set(&dprime_generators().group());
    let normal_are_d_and_dprime = match (d_set, dp_set) {
        (Some(d), Some(dp)) => {
            let found: BTreeSet<&BTreeSet<usize>> = normal.iter().copied().collect();
            normal.len() == 2 && found.contains(&d) && found.contains(&dp)
        }
        _ => false,
    };

    let u = equivalence_unitary();
    let u_el = unit(&u);
    let u_in_clifford = group.lookup(&u_el).is_some();
    let u_squared_in_clifford = group.lookup(&unit(&(&u * &u))).is_some();
    let u_normalizes_clifford = (0..n).all(|k| group.lookup(&unit(&u.conjugate(mats[k]))).is_some());

    Ok(SubgroupCensus {
        order4_elements: order4.len(),
        total: subgroups.len(),
        normal: normal.len(),
        normal_are_d_and_dprime,
        u_in_clifford,
        u_squared_in_clifford,
        u_normalizes_clifford,
    })
}

fn unit(m: &ComplexMatrix) -> crate::numerics::GroupElement {
    crate::numerics::GroupElement::new(m.clone(), false, Tolerance::default()).expect("unitary input")
}

/// `[F, chi]` images of the two symplectic generators of the regrouped group.
pub fn dprime_symplectic_images() -> Result<(ComplexMatrix, ComplexMatrix)> {
    let dp = dprime_generators();
    Ok((to_operator(&dp.x_pair)?.op.matrix, to_operator(&dp.z_pair)?.op.matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw_reconstruction::{projective_set_eq, reconstruct_hw, uniqueness_check};
    use crate::weyl_heisenberg::omega;
    use std::sync::OnceLock;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn orbit() -> &'static FiducialOrbit {
        static O: OnceLock<FiducialOrbit> = OnceLock::new();
        O.get_or_init(|| FiducialOrbit::enumerate(tol()).unwrap())
    }

    fn clifford() -> &'static CliffordGroup {
        static G: OnceLock<CliffordGroup> = OnceLock::new();
        G.get_or_init(|| CliffordGroup::enumerate(DIM, false).unwrap())
    }

    #[test]
    fn h_orbit_of_fiducial() {
        let orbits = h_orbits(orbit(), 1).unwrap();
        assert_eq!(orbits.len(), 4);
        let idx = |a, b| DisplacementIndex::new(a, b, DIM).linear(DIM);
        let mut expected = [idx(0, 0), idx(2, 0), idx(0, 2), idx(2, 2)];
        expected.sort();
        assert_eq!(orbits[0].members, expected);
        // X^2 and Z^2 preserve each orbit
        for o in &orbits {
            for h in [(2, 0), (0, 2)] {
                let dh = displacement(DisplacementIndex::new(h.0, h.1, DIM), DIM);
                for &m in &o.members {
                    let j = orbit().lookup(&dh.conjugate(orbit().projector(m))).unwrap();
                    assert!(o.members.contains(&j));
                }
            }
        }
    }

    #[test]
    fn sixteen_regrouped_sics() {
        let all = regroup_all(orbit(), tol()).unwrap();
        assert_eq!(all.len(), 16);
        for r in &all {
            assert!(verify_sic(&r.to_povm(orbit()).states, DIM, tol()).unwrap().is_sic);
            // four states from each SIC of the row
            for p in &r.parts {
                assert_eq!(label_row(p.sic_label), r.row);
            }
        }
        let distinct: BTreeSet<&Vec<usize>> = all.iter().map(|r| &r.members).collect();
        assert_eq!(distinct.len(), 16);
    }

    #[test]
    fn regroup_row_rejects_non_rows() {
        assert!(regroup_row(orbit(), [1, 2, 3, 5], tol()).is_err());
        assert!(regroup_row(orbit(), [2, 3, 4, 1], tol()).is_err());
    }

    #[test]
    fn row_scan() {
        let s = exhaustive_regroup_scan(orbit(), false, tol()).unwrap();
        assert_eq!(s.degrees, vec![33]);
        assert_eq!(s.per_row, [8, 8, 8, 8]);
        assert_eq!(s.originals_found, 16);
        assert_eq!(s.regrouped_found, 16);
        assert_eq!(s.others_found, 0);
        assert_eq!(s.full_total, None);
    }

    #[test]
    fn full_scan_finds_32() {
        let s = exhaustive_regroup_scan(orbit(), true, tol()).unwrap();
        assert_eq!(s.full_total, Some(32));
        assert_eq!(s.each_state_in_two, Some(true));
    }

    #[test]
    fn bits_above() {
        let b = Bits::above(70);
        assert_eq!(b.iter().next(), Some(71));
        assert_eq!(b.count(), 256 - 71);
        assert_eq!(Bits::above(63).iter().next(), Some(64));
        assert_eq!(Bits::above(255).count(), 0);
    }

    #[test]
    fn dprime_literal_matches_symplectic() {
        let dp = dprime_generators();
        let (x, z) = dprime_symplectic_images().unwrap();
        assert!(proj_equal(&dp.x, &x, tol()).unwrap());
        assert!(proj_equal(&dp.z, &z, tol()).unwrap());
        assert!(dp.x.is_unitary(tol()) && dp.z.is_unitary(tol()));
        // the literal generators satisfy Z'X' = omega^-1 X'Z'
        assert!((dp.commutator() - omega(DIM).conj()).norm() < 1e-12);
        let group = dp.group();
        assert_eq!(group.iter().map(|m| m.projective_key()).collect::<BTreeSet<_>>().len(), 16);
    }

    #[test]
    fn regrouped_sics_are_dprime_covariant() {
        let group = dprime_generators().group();
        for r in regroup_all(orbit(), tol()).unwrap() {
            let povm = r.to_povm(orbit());
            for g in &group {
                for s in &povm.states {
                    let img = g.conjugate(s);
                    assert!(povm.states.iter().any(|t| t.max_abs_diff(&img) < 1e-9));
                }
            }
        }
    }

    #[test]
    fn reconstruction_on_regrouped_gives_dprime() {
        let dp = dprime_generators().group();
        for r in regroup_all(orbit(), tol()).unwrap().iter().step_by(5) {
            let rec = reconstruct_hw(&r.to_povm(orbit()), tol()).unwrap();
            assert!(rec.covariant);
            assert!(projective_set_eq(&rec.group, &dp));
            let u = uniqueness_check(clifford(), &r.to_povm(orbit()).states).unwrap();
            assert_eq!(u.symmetry_order, 48);
            assert!(u.unique);
        }
    }

    #[test]
    fn equivalence() {
        let r = equivalence_report(orbit(), tol()).unwrap();
        assert!(r.unitarity_deviation < 1e-12);
        assert!(r.fixes_fiducial);
        assert!(r.conjugates_d_to_dprime);
        assert!(r.preserves_orbit);
        assert!(r.maps_originals_to_regrouped);
    }

    #[test]
    fn subgroup_census() {
        let c = hw_conjugate_subgroup_census(clifford()).unwrap();
        assert_eq!(c.order4_elements, 360);
        assert_eq!(c.total, 32);
        assert_eq!(c.normal, 2);
        assert!(c.normal_are_d_and_dprime);
        assert!(!c.u_in_clifford);
        assert!(c.u_squared_in_clifford);
        assert!(c.u_normalizes_clifford);
    }
}
