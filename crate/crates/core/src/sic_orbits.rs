//! The 256-state fiducial orbit in dimension four, its 16 SICs, stabilizers,
//! triple-product invariants and the action of the symmetry group on SICs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::clifford_group::{to_operator, CliffordGroup, Mat2, SymplecticPair};
use crate::error::{Error, Result};
use crate::finite_group::FiniteGroup;
use crate::numerics::{ComplexMatrix, GroupElement, Ket, Tolerance, C64};
use crate::weyl_heisenberg::{fiducial_ket_d4, generate_sic, verify_sic, DisplacementIndex, SicPovm};

pub const DIM: usize = 4;
pub const NUM_SICS: usize = 16;
pub const SIC_SIZE: usize = DIM * DIM;
pub const ORBIT_SIZE: usize = NUM_SICS * SIC_SIZE;

/// `F_n` of the unitary `[F_n, 0]` producing SIC `n` from SIC 1. Labels run
/// row-major over a 4x4 arrangement.
pub const SIC_TRANSFORMS: [Mat2; NUM_SICS] = [
    [[1, 0], [0, 1]],
    [[0, 3], [5, 7]],
    [[2, 1], [1, 1]],
    [[6, 7], [3, 5]],
    [[0, 3], [5, 5]],
    [[0, 1], [7, 1]],
    [[6, 7], [7, 7]],
    [[3, 1], [1, 6]],
    [[3, 1], [2, 1]],
    [[6, 7], [1, 4]],
    [[0, 3], [5, 6]],
    [[0, 1], [7, 0]],
    [[6, 7], [5, 6]],
    [[3, 1], [0, 3]],
    [[0, 1], [7, 2]],
    [[0, 3], [5, 0]],
];

/// Antiunitary generator of the stabilizer of the standard fiducial.
pub fn stabilizer_generator() -> SymplecticPair {
    SymplecticPair::new([[-1, 1], [-1, 2]], [2, 0], DIM).expect("det is -1")
}

fn check_label(label: usize) -> Result<()> {
    if (1..=NUM_SICS).contains(&label) {
        Ok(())
    } else {
        Err(Error::InvalidLabel(label))
    }
}

/// `[F_n, 0]` for SIC label `n` in `1..=16`.
pub fn sic_transform(label: usize) -> Result<SymplecticPair> {
    check_label(label)?;
    SymplecticPair::new(SIC_TRANSFORMS[label - 1], [0, 0], DIM)
}

/// Row (0-based) of a SIC label in the 4x4 arrangement.
pub fn label_row(label: usize) -> usize {
    (label - 1) / 4
}

/// Column (0-based) of a SIC label in the 4x4 arrangement.
pub fn label_column(label: usize) -> usize {
    (label - 1) % 4
}

/// All 256 fiducial projectors. State `i` belongs to SIC `i / 16 + 1` and is
/// `D_p V_n |psi_f>` with `p = from_linear(i % 16)`.
#[derive(Clone, Debug)]
pub struct FiducialOrbit {
    kets: Vec<Ket>,
    projectors: Vec<ComplexMatrix>,
    index: HashMap<Vec<i64>, usize>,
}

impl FiducialOrbit {
    pub fn enumerate(tol: Tolerance) -> Result<Self> {
        let psi = fiducial_ket_d4();
        let mut kets = Vec::with_capacity(ORBIT_SIZE);
        let mut projectors = Vec::with_capacity(ORBIT_SIZE);
        for label in 1..=NUM_SICS {
            let v = to_operator(&sic_transform(label)?)?.op.apply(&psi)?;
            let sic = generate_sic(&v, DIM, tol)?;
            let report = verify_sic(&sic.states, DIM, tol)?;
            if !report.is_sic {
                return Err(Error::VerificationFailed(format!("SIC {label} fails the SIC conditions")));
            }
            for p in DisplacementIndex::all(DIM) {
                kets.push(crate::weyl_heisenberg::displacement(p, DIM).apply(&v)?);
            }
            projectors.extend(sic.states);
        }
        let index: HashMap<Vec<i64>, usize> =
            projectors.iter().enumerate().map(|(i, r)| (r.entry_key(), i)).collect();
        if index.len() != ORBIT_SIZE {
            return Err(Error::WrongCardinality { expected: ORBIT_SIZE, found: index.len() });
        }
        Ok(Self { kets, projectors, index })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn projector(&self, i: usize) -> &ComplexMatrix {
        &self.projectors[i]
    }

    pub fn ket(&self, i: usize) -> &Ket {
        &self.kets[i]
    }

    pub fn sic_label(&self, i: usize) -> usize {
        i / SIC_SIZE + 1
    }

    /// `(SIC label, displacement)` of state `i`.
    pub fn hw_index(&self, i: usize) -> (usize, DisplacementIndex) {
        (self.sic_label(i), DisplacementIndex::from_linear(i % SIC_SIZE, DIM))
    }

    pub fn position(&self, label: usize, p: DisplacementIndex) -> usize {
        (label - 1) * SIC_SIZE + p.linear(DIM)
    }

    pub fn sic_states(&self, label: usize) -> Result<&[ComplexMatrix]> {
        check_label(label)?;
        Ok(&self.projectors[(label - 1) * SIC_SIZE..label * SIC_SIZE])
    }

    pub fn sic(&self, label: usize) -> Result<SicPovm> {
        Ok(SicPovm { d: DIM, label: Some(format!("SIC {label}")), states: self.sic_states(label)?.to_vec() })
    }

    /// Index of the orbit state equal to `rho`.
    pub fn lookup(&self, rho: &ComplexMatrix) -> Option<usize> {
        if rho.dim() != DIM {
            return None;
        }
        if let Some(&i) = self.index.get(&rho.entry_key()) {
            return Some(i);
        }
        // rounding can straddle a key boundary; fall back to fidelity
        self.projectors.iter().position(|p| (p.trace_product(rho).re - 1.0).abs() < 1e-6 && rho.max_abs_diff(p) < 1e-6)
    }

    /// Image of state `i` under `g`.
    pub fn image(&self, g: &GroupElement, i: usize) -> Option<usize> {
        self.lookup(&g.conjugate_operator(&self.projectors[i]).ok()?)
    }

    /// Permutation of the 256 states induced by `g`, if `g` preserves the orbit.
    pub fn state_permutation(&self, g: &GroupElement) -> Option<Vec<usize>> {
        (0..self.len()).map(|i| self.image(g, i)).collect()
    }

    pub fn is_closed_under(&self, group: &CliffordGroup) -> bool {
        group.elements().par_iter().all(|e| self.state_permutation(&e.op).is_some())
    }
}

/// Indices (into `group`) of the elements fixing `rho`.
pub fn stability_group(
    orbit: &FiducialOrbit,
    group: &CliffordGroup,
    rho: &ComplexMatrix,
    tol: Tolerance,
) -> Result<Vec<usize>> {
    orbit.lookup(rho).ok_or(Error::NotInOrbit)?;
    Ok((0..group.order())
        .into_par_iter()
        .filter(|&k| {
            let img = group.element(k).op.conjugate_operator(rho).expect("dimension checked by lookup");
            img.max_abs_diff(rho) <= tol.abs()
        })
        .collect())
}

/// Orbits of `g` on the states of SIC `label` other than its fixed points,
/// each as a cycle starting at its smallest displacement, ordered by that
/// starting point.
pub fn stabilizer_orbits_within_sic(
    orbit: &FiducialOrbit,
    g: &GroupElement,
    label: usize,
) -> Result<Vec<Vec<DisplacementIndex>>> {
    let perm = sic_state_permutation(orbit, g, label)?;
    let mut seen = [false; SIC_SIZE];
    let mut cycles = Vec::new();
    for start in 0..SIC_SIZE {
        if seen[start] || perm[start] == start {
            continue;
        }
        let mut cycle = Vec::new();
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            cycle.push(DisplacementIndex::from_linear(x, DIM));
            x = perm[x];
        }
        cycles.push(cycle);
    }
    Ok(cycles)
}

/// Action of `g` on the 16 states of SIC `label`, as positions `0..16`.
pub fn sic_state_permutation(orbit: &FiducialOrbit, g: &GroupElement, label: usize) -> Result<Vec<usize>> {
    check_label(label)?;
    let base = (label - 1) * SIC_SIZE;
    orbit
        .sic_states(label)?
        .iter()
        .map(|rho| {
            let img = g.conjugate_operator(rho)?;
            orbit
                .lookup(&img)
                .filter(|&j| j / SIC_SIZE == label - 1)
                .map(|j| j - base)
                .ok_or_else(|| Error::VerificationFailed(format!("element does not preserve SIC {label}")))
        })
        .collect()
}

/// `tr(r1 r2 r3)`.
pub fn triple_trace(r1: &ComplexMatrix, r2: &ComplexMatrix, r3: &ComplexMatrix) -> C64 {
    (r1 * r2).trace_product(r3)
}

/// Distinct triple-product traces over ordered triples of distinct states.
#[derive(Clone, Debug, Serialize)]
pub struct TripleTraceCensus {
    /// Sorted by real part (to 1e-9), then imaginary part.
    pub values: Vec<C64>,
    pub multiplicity: Vec<usize>,
}

impl TripleTraceCensus {
    /// Clusters every `tr(r_i r_j r_k)`, `i, j, k` distinct; values closer than
    /// `gap` are merged.
    pub fn compute(states: &[ComplexMatrix], gap: f64) -> Self {
        let n = states.len();
        let raw: Vec<C64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let pairs: Vec<(usize, ComplexMatrix)> =
                    (0..n).filter(|&j| j != i).map(|j| (j, &states[i] * &states[j])).collect();
                pairs
                    .into_iter()
                    .flat_map(move |(j, prod)| {
                        (0..n).filter(move |&k| k != i && k != j).map(move |k| prod.trace_product(&states[k]))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut clusters: Vec<(C64, usize)> = Vec::new();
        for z in raw {
            match clusters.iter_mut().find(|(c, _)| (*c - z).norm() < gap) {
                Some(c) => c.1 += 1,
                None => clusters.push((z, 1)),
            }
        }
        // real parts equal up to roundoff must not decide the order
        let coarse = |x: f64| (x * 1e9).round() as i64;
        clusters.sort_by(|a, b| coarse(a.0.re).cmp(&coarse(b.0.re)).then(a.0.im.total_cmp(&b.0.im)));
        Self { values: clusters.iter().map(|c| c.0).collect(), multiplicity: clusters.iter().map(|c| c.1).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> usize {
        self.multiplicity.iter().sum()
    }

    pub fn real_count(&self, tol: f64) -> usize {
        self.values.iter().filter(|z| z.im.abs() <= tol).count()
    }

    /// Number of values whose conjugate is also present, counted once per pair.
    pub fn conjugate_pairs(&self, tol: f64) -> usize {
        let nonreal: Vec<&C64> = self.values.iter().filter(|z| z.im.abs() > tol).collect();
        let paired = nonreal.iter().filter(|z| nonreal.iter().any(|w| (z.conj() - **w).norm() <= tol)).count();
        paired / 2
    }

    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.values.iter().enumerate() {
            for b in &self.values[i + 1..] {
                gap = gap.min((a - b).norm());
            }
        }
        gap
    }

    /// Same values (within `tol`) with the same multiplicities.
    pub fn same_multiset(&self, other: &Self, tol: f64) -> bool {
        self.len() == other.len()
            && self.values.iter().zip(&self.multiplicity).all(|(z, m)| {
                other.values.iter().zip(&other.multiplicity).any(|(w, n)| (z - w).norm() <= tol && m == n)
            })
    }

    pub fn contains_phase(&self, phi: f64, tol: f64) -> bool {
        self.values.iter().any(|z| {
            let diff = (z.arg() - phi).rem_euclid(2.0 * PI);
            diff.min(2.0 * PI - diff) <= tol
        })
    }
}


/// Permutations `pi` of `states` with `pi(fixed) = fixed` and
/// `tr(r_pi(i) r_pi(j) r_pi(k)) = tr(r_i r_j r_k)` for all distinct `i, j, k`,
/// or the complex conjugate of the right side when `conjugate` is set.
pub fn triple_preserving_permutations(
    states: &[ComplexMatrix],
    fixed: usize,
    conjugate: bool,
    tol: f64,
) -> Vec<Vec<usize>> {
    let n = states.len();
    let mut t = vec![C64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for j in 0..n {
            let prod = &states[i] * &states[j];
            for k in 0..n {
                t[(i * n + j) * n + k] = prod.trace_product(&states[k]);
            }
        }
    }
    let search = TripleSearch { n, t, conjugate, tol };
    let order: Vec<usize> = std::iter::once(fixed).chain((0..n).filter(|&x| x != fixed)).collect();
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut found = Vec::new();
    search.extend(&order, 0, &mut image, &mut used, &mut found, fixed);
    found
}

struct TripleSearch {
    n: usize,
    t: Vec<C64>,
    conjugate: bool,
    tol: f64,
}

impl TripleSearch {
    fn t(&self, i: usize, j: usize, k: usize) -> C64 {
        self.t[(i * self.n + j) * self.n + k]
    }

    /// Checks the triples `(x, a, b)` with `a, b` assigned earlier; cyclicity
    /// of the trace covers the other positions of `x`.
    fn consistent(&self, assigned: &[usize], x: usize, image: &[usize]) -> bool {
        assigned.iter().all(|&a| {
            assigned.iter().all(|&b| {
                if a == b {
                    return true;
                }
                let want = self.t(x, a, b);
                let want = if self.conjugate { want.conj() } else { want };
                (self.t(image[x], image[a], image[b]) - want).norm() <= self.tol
            })
        })
    }

    fn extend(
        &self,
        order: &[usize],
        depth: usize,
        image: &mut [usize],
        used: &mut [bool],
        found: &mut Vec<Vec<usize>>,
        fixed: usize,
    ) {
        if depth == order.len() {
            found.push(image.to_vec());
            return;
        }
        let x = order[depth];
        for y in 0..self.n {
            if used[y] || (x == fixed) != (y == fixed) {
                continue;
            }
            image[x] = y;
            if self.consistent(&order[..depth], x, image) {
                used[y] = true;
                self.extend(order, depth + 1, image, used, found, fixed);
                used[y] = false;
            }
        }
        image[x] = usize::MAX;
    }
}

fn compose_perm(p: &[usize], q: &[usize]) -> Vec<usize> {
    q.iter().map(|&i| p[i]).collect()
}

/// Elements of the extended Clifford group mapping one SIC onto itself,
/// together with their action on its 16 states.
#[derive(Clone, Debug)]
pub struct SicSymmetryGroup {
    pub label: usize,
    /// Indices into the extended Clifford group.
    pub members: Vec<usize>,
    pub antiunitary: Vec<bool>,
    /// `perms[m][i]` is the image of state `i` under member `m`.
    pub perms: Vec<Vec<usize>>,
}

impl SicSymmetryGroup {
    pub fn compute(orbit: &FiducialOrbit, group: &CliffordGroup, label: usize) -> Result<Self> {
        check_label(label)?;
        let hits: Vec<(usize, bool, Vec<usize>)> = (0..group.order())
            .into_par_iter()
            .filter_map(|k| {
                let op = &group.element(k).op;
                sic_state_permutation(orbit, op, label).ok().map(|p| (k, op.antiunitary, p))
            })
            .collect();
        let mut out = Self { label, members: vec![], antiunitary: vec![], perms: vec![] };
        for (k, anti, p) in hits {
            out.members.push(k);
            out.antiunitary.push(anti);
            out.perms.push(p);
        }
        Ok(out)
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn unitary_order(&self) -> usize {
        self.antiunitary.iter().filter(|a| !**a).count()
    }

    /// The permutation group of the unitary members (or of all members).
    pub fn permutation_group(&self, unitary_only: bool) -> Result<(FiniteGroup, Vec<Vec<usize>>)> {
        let perms: Vec<Vec<usize>> = self
            .perms
            .iter()
            .zip(&self.antiunitary)
            .filter(|(_, a)| !unitary_only || !**a)
            .map(|(p, _)| p.clone())
            .collect();
        let distinct: HashSet<&Vec<usize>> = perms.iter().collect();
        if distinct.len() != perms.len() {
            return Err(Error::VerificationFailed("action on SIC states is not faithful".into()));
        }
        let g = FiniteGroup::from_elements(&perms, |p, q| compose_perm(p, q), |p| p.clone())?;
        Ok((g, perms))
    }

    /// Translations `q -> q + p` of the displacement group, as permutations.
    pub fn translations() -> BTreeSet<Vec<usize>> {
        DisplacementIndex::all(DIM)
            .map(|p| {
                (0..SIC_SIZE)
                    .map(|q| DisplacementIndex::from_linear(q, DIM).add(p, DIM).linear(DIM))
                    .collect()
            })
            .collect()
    }

    /// Census of the unitary symmetry group.
    pub fn structure(&self) -> Result<SymmetryStructure> {
        let (g, perms) = self.permutation_group(true)?;
        let all = g.all();
        let mut order_census = BTreeMap::new();
        for a in 0..g.order() {
            *order_census.entry(g.element_order(a)).or_insert(0) += 1;
        }
        let mut classes: Vec<(usize, usize)> =
            g.conjugacy_classes(&all).iter().map(|c| (g.element_order(c[0]), c.len())).collect();
        classes.sort();
        // a subgroup of order 16 consists of 2-elements, so it is unique iff the
        // 2-elements number 16 and form a subgroup
        let two_elements: BTreeSet<usize> = (0..g.order()).filter(|&a| g.element_order(a).is_power_of_two()).collect();
        let two_closed = g.is_subgroup(&two_elements);
        let two_perms: BTreeSet<Vec<usize>> = two_elements.iter().map(|&a| perms[a].clone()).collect();
        Ok(SymmetryStructure {
            order: self.order(),
            unitary_order: g.order(),
            order_census,
            classes,
            two_elements: two_elements.len(),
            unique_order16_subgroup: two_elements.len() == 16 && two_closed,
            order16_subgroup_normal: two_closed && g.is_normal(&two_elements),
            order16_subgroup_is_displacements: two_perms == Self::translations(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryStructure {
    pub order: usize,
    pub unitary_order: usize,
    /// Element order -> number of elements.
    pub order_census: BTreeMap<usize, usize>,
    /// `(element order, class size)`, sorted.
    pub classes: Vec<(usize, usize)>,
    pub two_elements: usize,
    pub unique_order16_subgroup: bool,
    pub order16_subgroup_normal: bool,
    pub order16_subgroup_is_displacements: bool,
}

/// Stabilizer of the fixed state among triple-invariant permutations, unitary
/// and antiunitary kinds separately.
#[derive(Clone, Debug, Serialize)]
pub struct StabilizerCertificate {
    pub unitary_like: usize,
    pub antiunitary_like: usize,
    /// Every triple-preserving permutation is realized by a Clifford element.
    pub all_realized: bool,
}

/// Counts permutations of SIC `label` fixing its first state and preserving
/// (or conjugating) all triple traces, and checks they all come from `sym`.
pub fn certify_stabilizer(orbit: &FiducialOrbit, sym: &SicSymmetryGroup, tol: f64) -> Result<StabilizerCertificate> {
    let states = orbit.sic_states(sym.label)?;
    let plain = triple_preserving_permutations(states, 0, false, tol);
    let conj = triple_preserving_permutations(states, 0, true, tol);
    let realized = |perms: &[Vec<usize>], anti: bool| {
        perms.iter().all(|p| sym.perms.iter().zip(&sym.antiunitary).any(|(q, a)| q == p && *a == anti))
    };
    Ok(StabilizerCertificate {
        unitary_like: plain.len(),
        antiunitary_like: conj.len(),
        all_realized: realized(&plain, false) && realized(&conj, true),
    })
}

/// Permutation of SIC labels induced by a Clifford element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymmetryPermutation {
    pub element: SymplecticPair,
    /// `images[n - 1]` is the label of the image of SIC `n`.
    pub images: Vec<usize>,
}

impl SymmetryPermutation {
    pub fn apply(&self, label: usize) -> usize {
        self.images[label - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &l)| l == i + 1)
    }
}

fn label_images(orbit: &FiducialOrbit, op: &GroupElement) -> Result<Vec<usize>> {
    (1..=NUM_SICS)
        .map(|label| {
            let base = (label - 1) * SIC_SIZE;
            let mut target = None;
            for i in base..base + SIC_SIZE {
                let j = orbit.image(op, i).ok_or(Error::NotInOrbit)?;
                let l = orbit.sic_label(j);
                if *target.get_or_insert(l) != l {
                    return Err(Error::VerificationFailed(format!("SIC {label} is split by the element")));
                }
            }
            Ok(target.expect("SICs are non-empty"))
        })
        .collect()
}

pub fn symmetry_action(orbit: &FiducialOrbit, s: &SymplecticPair) -> Result<SymmetryPermutation> {
    let op = to_operator(s)?.op;
    Ok(SymmetryPermutation { element: *s, images: label_images(orbit, &op)? })
}

/// Row action `[row of image of row r]`, if rows are mapped to rows.
fn row_action(images: &[usize]) -> Option<[usize; 4]> {
    let mut out = [0; 4];
    for (r, slot) in out.iter_mut().enumerate() {
        let rows: BTreeSet<usize> = (0..4).map(|c| label_row(images[4 * r + c])).collect();
        if rows.len() != 1 {
            return None;
        }
        *slot = *rows.first().expect("non-empty");
    }
    Some(out)
}

/// Structure of the group induced on the 16 SIC labels.
#[derive(Clone, Debug, Serialize)]
pub struct LabelActionReport {
    pub unitary_permutations: usize,
    pub extended_permutations: usize,
    /// Unitary Clifford elements fixing every SIC.
    pub kernel_order: usize,
    pub kernel_is_displacements: bool,
    pub order_census: BTreeMap<usize, usize>,
    pub classes: Vec<(usize, usize)>,
    pub rows_to_rows: bool,
    pub row_subgroup_order: usize,
    pub row_subgroup_normal: bool,
    pub row_subgroup_uniform: bool,
    /// Distinct row actions (0-based rows) of the unitary group.
    pub row_actions: Vec<[usize; 4]>,
    /// The row actions are the powers of `1 -> 3 -> 2 -> 4 -> 1`.
    pub row_cycle: bool,
    pub extended_row_actions: usize,
    pub central_involutions: Vec<Vec<usize>>,
    pub central_swaps_rows: bool,
    pub central_preserves_columns: bool,
}

pub fn label_action_report(orbit: &FiducialOrbit, group: &CliffordGroup) -> Result<LabelActionReport> {
    let images: Vec<(bool, Vec<usize>)> = group
        .elements()
        .par_iter()
        .map(|e| label_images(orbit, &e.op).map(|im| (e.op.antiunitary, im)))
        .collect::<Result<_>>()?;
    let identity: Vec<usize> = (1..=NUM_SICS).collect();
    let kernel: Vec<usize> =
        (0..group.order()).filter(|&k| !images[k].0 && images[k].1 == identity).collect();
    let kernel_is_displacements = kernel.len() == SIC_SIZE
        && kernel.iter().all(|&k| {
            let op = &group.element(k).op;
            DisplacementIndex::all(DIM)
                .any(|p| crate::numerics::proj_equal(&op.matrix, &crate::weyl_heisenberg::displacement(p, DIM), Tolerance::default()).unwrap_or(false))
        });

    let unitary: Vec<Vec<usize>> = images
        .iter()
        .filter(|(a, _)| !a)
        .map(|(_, im)| im.iter().map(|l| l - 1).collect::<Vec<usize>>())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let extended: BTreeSet<Vec<usize>> = images.iter().map(|(_, im)| im.clone()).collect();
    let g = FiniteGroup::from_elements(&unitary, |p, q| compose_perm(p, q), |p| p.clone())?;
    let all = g.all();

    let mut order_census = BTreeMap::new();
    for a in 0..g.order() {
        *order_census.entry(g.element_order(a)).or_insert(0) += 1;
    }
    let mut classes: Vec<(usize, usize)> =
        g.conjugacy_classes(&all).iter().map(|c| (g.element_order(c[0]), c.len())).collect();
    classes.sort();

    let as_labels = |p: &Vec<usize>| p.iter().map(|x| x + 1).collect::<Vec<usize>>();
    let rows: Vec<Option<[usize; 4]>> = unitary.iter().map(|p| row_action(&as_labels(p))).collect();
    let rows_to_rows = rows.iter().all(Option::is_some);
    let row_subgroup: BTreeSet<usize> = (0..g.order()).filter(|&a| rows[a] == Some([0, 1, 2, 3])).collect();
    let row_subgroup_uniform = row_subgroup.iter().all(|&a| {
        let cols: BTreeSet<Vec<usize>> =
            (0..4).map(|r| (0..4).map(|c| unitary[a][4 * r + c] % 4).collect()).collect();
        cols.len() == 1
    });
    let row_actions: Vec<[usize; 4]> = rows.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    // rows 1 -> 3 -> 2 -> 4 -> 1, 0-based
    let cycle = [2usize, 3, 1, 0];
    let mut powers = BTreeSet::new();
    let mut acc = [0usize, 1, 2, 3];
    for _ in 0..4 {
        powers.insert(acc);
        acc = [cycle[acc[0]], cycle[acc[1]], cycle[acc[2]], cycle[acc[3]]];
    }
    let row_cycle = row_actions.iter().copied().collect::<BTreeSet<_>>() == powers;
    let extended_row_actions = extended.iter().filter_map(|im| row_action(im)).collect::<BTreeSet<_>>().len();

    let center = g.center(&all);
    let central: Vec<usize> = center.iter().copied().filter(|&a| g.element_order(a) == 2).collect();
    let central_involutions: Vec<Vec<usize>> = central.iter().map(|&a| as_labels(&unitary[a])).collect();
    let central_swaps_rows = central.iter().all(|&a| rows[a] == Some([1, 0, 3, 2]));
    let central_preserves_columns =
        central.iter().all(|&a| (0..NUM_SICS).all(|n| unitary[a][n] % 4 == n % 4));

    Ok(LabelActionReport {
        unitary_permutations: g.order(),
        extended_permutations: extended.len(),
        kernel_order: kernel.len(),
        kernel_is_displacements,
        order_census,
        classes,
        rows_to_rows,
        row_subgroup_order: row_subgroup.len(),
        row_subgroup_normal: g.is_subgroup(&row_subgroup) && g.is_normal(&row_subgroup),
        row_subgroup_uniform,
        row_actions,
        row_cycle,
        extended_row_actions,
        central_involutions,
        central_swaps_rows,
        central_preserves_columns,
    })
}

fn check_family_dim(d: usize) -> Result<()> {
    if d < 3 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

pub fn triple_family_u(d: usize, theta: f64) -> f64 {
    let (df, c) = (d as f64, theta.cos());
    (-c + (c * c + df).sqrt()) / (df * (df + 1.0)).sqrt()
}

pub fn triple_family_v(d: usize, theta: f64) -> f64 {
    let (df, c) = (d as f64, theta.cos());
    ((df * df - df - 2.0 * c * c + 2.0 * c * (c * c + df).sqrt()) / (df * (df + 1.0))).max(0.0).sqrt()
}

/// Three kets in dimension `d` with pairwise fidelity `1 / (d + 1)`,
/// parametrized by `theta`.
pub fn triple_family(d: usize, theta: f64) -> Result<[Ket; 3]> {
    check_family_dim(d)?;
    let df = d as f64;
    let a = 1.0 / (df + 1.0).sqrt();
    let mut k1 = vec![C64::new(0.0, 0.0); d];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    k1[0] = C64::new(1.0, 0.0);
    k2[0] = C64::new(a, 0.0);
    k2[1] = C64::new((df / (df + 1.0)).sqrt(), 0.0);
    k3[0] = C64::new(a, 0.0);
    k3[1] = C64::from_polar(triple_family_u(d, theta), theta);
    k3[2] = C64::new(triple_family_v(d, theta), 0.0);
    Ok([k1, k2, k3])
}

/// Argument of the triple trace of the family, in `[-pi, pi)`.
pub fn triple_phase(d: usize, theta: f64) -> Result<f64> {
    check_family_dim(d)?;
    let (df, c) = (d as f64, theta.cos());
    let z = (C64::new(1.0, 0.0) + C64::from_polar(-c + (c * c + df).sqrt(), theta)) / ((df + 1.0) * (df + 1.0));
    let phi = z.arg();
    Ok(if phi >= PI - 1e-12 { -PI } else { phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner, proj_equal};
    use std::sync::OnceLock;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn orbit() -> &'static FiducialOrbit {
        static O: OnceLock<FiducialOrbit> = OnceLock::new();
        O.get_or_init(|| FiducialOrbit::enumerate(tol()).unwrap())
    }

    fn extended() -> &'static CliffordGroup {
        static G: OnceLock<CliffordGroup> = OnceLock::new();
        G.get_or_init(|| CliffordGroup::enumerate(DIM, true).unwrap())
    }

    fn sym1() -> &'static SicSymmetryGroup {
        static S: OnceLock<SicSymmetryGroup> = OnceLock::new();
        S.get_or_init(|| SicSymmetryGroup::compute(orbit(), extended(), 1).unwrap())
    }

    fn d(p1: i64, p2: i64) -> DisplacementIndex {
        DisplacementIndex::new(p1, p2, DIM)
    }

    #[test]
    fn orbit_has_256_states_in_16_sics() {
        let o = orbit();
        assert_eq!(o.len(), 256);
        for label in 1..=16 {
            let r = verify_sic(o.sic_states(label).unwrap(), DIM, tol()).unwrap();
            assert!(r.is_sic);
        }
        assert!(o.sic_states(0).is_err());
        assert!(o.sic_states(17).is_err());
    }

    #[test]
    fn first_state_is_standard_fiducial() {
        let psi = fiducial_ket_d4();
        assert!(o_proj_eq(orbit().projector(0), &ComplexMatrix::outer(&psi)));
        assert_eq!(orbit().hw_index(0), (1, d(0, 0)));
        assert_eq!(orbit().hw_index(16 * 4 + 7), (5, d(1, 3)));
    }

    fn o_proj_eq(a: &ComplexMatrix, b: &ComplexMatrix) -> bool {
        proj_equal(a, b, tol()).unwrap()
    }

    #[test]
    fn kets_match_projectors() {
        let o = orbit();
        for i in (0..256).step_by(13) {
            assert!(o.projector(i).max_abs_diff(&ComplexMatrix::outer(o.ket(i))) < 1e-12);
            assert!((inner(o.ket(i), o.ket(i)).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orbit_closed_under_extended_group() {
        assert!(orbit().is_closed_under(extended()));
    }

    #[test]
    fn lookup_rejects_foreign_state() {
        let mut e0 = vec![C64::new(0.0, 0.0); 4];
        e0[0] = C64::new(1.0, 0.0);
        assert_eq!(orbit().lookup(&ComplexMatrix::outer(&e0)), None);
        assert_eq!(
            stability_group(orbit(), extended(), &ComplexMatrix::outer(&e0), tol()).unwrap_err(),
            Error::NotInOrbit
        );
    }

    #[test]
    fn stabilizer_of_fiducial() {
        let g = extended();
        let stab = stability_group(orbit(), g, orbit().projector(0), tol()).unwrap();
        assert_eq!(stab.len(), 6);
        assert_eq!(stab.iter().filter(|&&k| !g.element(k).op.antiunitary).count(), 3);
        let gen = to_operator(&stabilizer_generator()).unwrap().op;
        assert!(stab.iter().any(|&k| g.element(k).op.proj_equal(&gen, tol()).unwrap()));
        // cyclic of order 6
        assert!(gen.pow(6).proj_equal(&GroupElement::identity(4), tol()).unwrap());
        assert!(!gen.pow(2).proj_equal(&GroupElement::identity(4), tol()).unwrap());
        assert!(!gen.pow(3).proj_equal(&GroupElement::identity(4), tol()).unwrap());
        // orbit-stabilizer
        assert_eq!(orbit().len() * stab.len(), g.order());
    }

    #[test]
    fn other_states_have_order_six_stabilizers() {
        for i in [17usize, 100, 255] {
            assert_eq!(stability_group(orbit(), extended(), orbit().projector(i), tol()).unwrap().len(), 6);
        }
    }

    #[test]
    fn generator_matches_explicit_matrix() {
        let e = |k: f64| C64::from_polar(0.5, k * PI / 4.0);
        let i = C64::new(0.0, 0.5);
        let h = C64::new(0.5, 0.0);
        let v = ComplexMatrix::from_rows(&[
            vec![h, e(1.0), -h, e(1.0)],
            vec![i, e(-3.0), i, e(1.0)],
            vec![h, e(-3.0), -h, e(-3.0)],
            vec![i, e(1.0), i, e(-3.0)],
        ])
        .unwrap();
        let explicit = GroupElement::new(v, true, tol()).unwrap();
        assert!(to_operator(&stabilizer_generator()).unwrap().op.proj_equal(&explicit, tol()).unwrap());
    }

    #[test]
    fn five_stabilizer_orbits() {
        let gen = to_operator(&stabilizer_generator()).unwrap().op.pow(2);
        let cycles = stabilizer_orbits_within_sic(orbit(), &gen, 1).unwrap();
        let as_sets: BTreeSet<BTreeSet<(usize, usize)>> =
            cycles.iter().map(|c| c.iter().map(|p| (p.p1, p.p2)).collect()).collect();
        let expected: BTreeSet<BTreeSet<(usize, usize)>> = [
            vec![(1, 0), (0, 3), (3, 1)],
            vec![(3, 3), (3, 2), (2, 3)],
            vec![(0, 1), (1, 3), (3, 0)],
            vec![(1, 2), (2, 1), (1, 1)],
            vec![(2, 0), (0, 2), (2, 2)],
        ]
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect();
        assert_eq!(as_sets, expected);
        assert!(cycles.iter().all(|c| c.len() == 3));
        // cycle order follows the generator
        let o1 = cycles.iter().find(|c| c.contains(&d(1, 0))).unwrap();
        let start = o1.iter().position(|&p| p == d(1, 0)).unwrap();
        assert_eq!(o1[(start + 1) % 3], d(0, 3));
    }

    #[test]
    fn triple_trace_of_a_pure_state() {
        let rho = orbit().projector(3);
        assert!((triple_trace(rho, rho, rho) - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    // census values computed once by brute force over all ordered triples;
    // every value has modulus 1/(5 sqrt 5)
    const CENSUS: [(f64, f64, usize); 17] = [
        (-0.070315516850829, -0.055278640450004, 144),
        (-0.070315516850829, 0.055278640450004, 144),
        (-0.029247127875576, -0.084525768325580, 288),
        (-0.029247127875576, 0.084525768325580, 288),
        (0.0, -0.089442719099992, 288),
        (0.0, 0.089442719099992, 288),
        (0.048374330124739, -0.075232467625240, 96),
        (0.048374330124739, 0.075232467625240, 96),
        (0.055278640450004, -0.070315516850828, 288),
        (0.055278640450004, 0.070315516850828, 288),
        (0.070315516850829, -0.055278640450004, 144),
        (0.070315516850829, 0.055278640450004, 144),
        (0.075232467625240, -0.048374330124739, 96),
        (0.075232467625240, 0.048374330124739, 96),
        (0.084525768325580, -0.029247127875576, 288),
        (0.084525768325580, 0.029247127875576, 288),
        (0.089442719099992, 0.0, 96),
    ];

    #[test]
    fn census_of_first_sic() {
        let c = TripleTraceCensus::compute(orbit().sic_states(1).unwrap(), 1e-6);
        assert_eq!(c.len(), 17);
        assert_eq!(c.total(), 16 * 15 * 14);
        assert_eq!(c.real_count(1e-9), 1);
        assert_eq!(c.conjugate_pairs(1e-9), 8);
        assert!(c.min_gap() > 1e-3);
        for (&(re, im, m), (z, n)) in CENSUS.iter().zip(c.values.iter().zip(&c.multiplicity)) {
            assert!((z - C64::new(re, im)).norm() < 1e-12, "{z} vs {re}+{im}i");
            assert_eq!(m, *n);
        }
        let modulus = 1.0 / (5.0 * 5f64.sqrt());
        assert!(c.values.iter().all(|z| (z.norm() - modulus).abs() < 1e-12));
    }

    #[test]
    fn census_is_the_same_for_all_sics() {
        let first = TripleTraceCensus::compute(orbit().sic_states(1).unwrap(), 1e-6);
        for label in 2..=16 {
            let c = TripleTraceCensus::compute(orbit().sic_states(label).unwrap(), 1e-6);
            assert!(first.same_multiset(&c, 1e-9), "SIC {label}");
        }
    }

    #[test]
    fn symmetry_group_orders() {
        let s = sym1();
        assert_eq!(s.order(), 96);
        assert_eq!(s.unitary_order(), 48);
        let st = s.structure().unwrap();
        // (Z4 x Z4) x| Z3: same order as the group acting on labels, different structure
        assert_eq!(st.order_census, BTreeMap::from([(1, 1), (2, 3), (3, 32), (4, 12)]));
        assert_eq!(st.two_elements, 16);
        assert!(st.unique_order16_subgroup);
        assert!(st.order16_subgroup_normal);
        assert!(st.order16_subgroup_is_displacements);
    }

    #[test]
    fn stabilizer_certificate() {
        let cert = certify_stabilizer(orbit(), sym1(), 1e-9).unwrap();
        assert_eq!(cert.unitary_like, 3);
        assert_eq!(cert.antiunitary_like, 3);
        assert!(cert.all_realized);
    }

    #[test]
    fn identity_acts_trivially_on_labels() {
        let a = symmetry_action(orbit(), &SymplecticPair::identity(DIM)).unwrap();
        assert!(a.is_identity());
        let x = symmetry_action(orbit(), &SymplecticPair::new([[1, 0], [0, 1]], [1, 0], DIM).unwrap()).unwrap();
        assert!(x.is_identity());
    }

    #[test]
    fn sic_transforms_map_first_sic_to_label() {
        for label in 1..=16 {
            let a = symmetry_action(orbit(), &sic_transform(label).unwrap()).unwrap();
            assert_eq!(a.apply(1), label);
        }
    }

    #[test]
    fn label_action_structure() {
        let r = label_action_report(orbit(), &CliffordGroup::enumerate(DIM, false).unwrap()).unwrap();
        assert_eq!(r.unitary_permutations, 48);
        assert_eq!(r.kernel_order, 16);
        assert!(r.kernel_is_displacements);
        assert_eq!(r.order_census, BTreeMap::from([(1, 1), (2, 7), (3, 8), (4, 24), (6, 8)]));
        assert!(r.rows_to_rows);
        assert_eq!(r.row_subgroup_order, 12);
        assert!(r.row_subgroup_normal);
        assert!(r.row_subgroup_uniform);
        assert!(r.row_cycle);
        assert_eq!(r.central_involutions, vec![vec![5, 6, 7, 8, 1, 2, 3, 4, 13, 14, 15, 16, 9, 10, 11, 12]]);
        assert!(r.central_swaps_rows);
        assert!(r.central_preserves_columns);
        let e = label_action_report(orbit(), extended()).unwrap();
        assert_eq!(e.extended_permutations, 96);
        assert_eq!(e.extended_row_actions, 8);
    }

    #[test]
    fn family_fidelities() {
        for (dd, theta) in [(4usize, 0.0), (3, PI / 2.0), (5, -2.0)] {
            let k = triple_family(dd, theta).unwrap();
            let f = 1.0 / (dd as f64 + 1.0);
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                assert!((inner(&k[a], &k[b]).norm_sqr() - f).abs() < 1e-12);
            }
            let u = triple_family_u(dd, theta);
            let v = triple_family_v(dd, theta);
            assert!((u * u + v * v + f - 1.0).abs() < 1e-12);
        }
        assert_eq!(triple_family(2, 0.0).unwrap_err(), Error::InvalidDimension(2));
    }

    #[test]
    fn family_phase() {
        assert!(triple_phase(4, 0.0).unwrap().abs() < 1e-15);
        let grid: Vec<f64> = (0..1000).map(|k| -PI + 2.0 * PI * k as f64 / 1000.0).collect();
        let phis: Vec<f64> = grid.iter().map(|&t| triple_phase(4, t).unwrap()).collect();
        assert!(phis.windows(2).all(|w| w[1] > w[0]));
        assert!((phis[0] + PI).abs() < 1e-12);
    }

    #[test]
    fn generic_family_triple_is_not_in_the_census() {
        let c = TripleTraceCensus::compute(orbit().sic_states(1).unwrap(), 1e-6);
        assert!(!c.contains_phase(triple_phase(4, 0.3).unwrap(), 1e-6));
        // the real census value has phase zero, reached at theta = 0
        assert!(c.contains_phase(triple_phase(4, 0.0).unwrap(), 1e-6));
    }
}
