//! One pipeline per subcommand. Each returns its claims and artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::OnceLock;

use anyhow::{bail, Context as _, Result};
use serde_json::{json, Map, Value};

use sic4::clifford_group::{conjugation_action, to_operator, CliffordGroup};
use sic4::hw_reconstruction::{
    projective_set_eq, reconstruct_hw, reference_signature, signature_scan, standard_group, EigSignature,
};
use sic4::numerics::{eig_hermitian, inner, ComplexMatrix, Tolerance};
use sic4::regrouping::{
    dprime_generators, equivalence_report, exhaustive_regroup_scan, hw_conjugate_subgroup_census, regroup_all,
};
use sic4::sic_orbits::{
    certify_stabilizer, label_action_report, stability_group, stabilizer_generator, stabilizer_orbits_within_sic,
    triple_family, triple_phase, triple_trace, FiducialOrbit, SicSymmetryGroup, TripleTraceCensus, NUM_SICS,
};
use sic4::two_qubit::{
    concurrence_census, operator_schmidt_rank, partial_transpose_simplex_check, reduced_state_census,
    violating_patterns, Basis, TwoQubitAnalysis,
};
use sic4::weyl_heisenberg::{displacement, fiducial_ket_d4, phase, verify_sic, DisplacementIndex, SicConstants, SicPovm};

use crate::report::Claim;

/// Settings shared by every pipeline, with the expensive objects built once.
pub struct Context {
    pub tol: Tolerance,
    pub basis: Basis,
    pub full_scan: bool,
    pub input: Option<SicPovm>,
    orbit: OnceLock<FiducialOrbit>,
    extended: OnceLock<CliffordGroup>,
    unitary: OnceLock<CliffordGroup>,
}

impl Context {
    pub fn new(tol: Tolerance, basis: Basis, full_scan: bool, input: Option<SicPovm>) -> Self {
        Self {
            tol,
            basis,
            full_scan,
            input,
            orbit: OnceLock::new(),
            extended: OnceLock::new(),
            unitary: OnceLock::new(),
        }
    }

    fn orbit(&self) -> Result<&FiducialOrbit> {
        if let Some(o) = self.orbit.get() {
            return Ok(o);
        }
        let o = FiducialOrbit::enumerate(self.tol)?;
        Ok(self.orbit.get_or_init(|| o))
    }

    fn group(&self, extended: bool) -> Result<&CliffordGroup> {
        let cell = if extended { &self.extended } else { &self.unitary };
        if let Some(g) = cell.get() {
            return Ok(g);
        }
        let g = CliffordGroup::enumerate(4, extended)?;
        Ok(cell.get_or_init(|| g))
    }
}

/// Claims and artifacts produced by one pipeline.
#[derive(Default)]
pub struct Outcome {
    pub claims: Vec<Claim>,
    pub artifacts: Map<String, Value>,
}

impl Outcome {
    fn push(&mut self, c: Claim) {
        self.claims.push(c);
    }

    fn extend(&mut self, other: Outcome) {
        self.claims.extend(other.claims);
        self.artifacts.extend(other.artifacts);
    }
}

pub fn orbit(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol.abs();
    let mut out = Outcome::default();
    let psi = fiducial_ket_d4();
    let target = 1.0 / 5f64.sqrt();
    let mut worst: f64 = 0.0;
    for p in DisplacementIndex::all(4).filter(|p| !p.is_zero()) {
        worst = worst.max((inner(&psi, &displacement(p, 4).apply(&psi)?).norm() - target).abs());
    }
    out.push(Claim::approx("orbit.fiducial_overlap_deviation", "fiducial overlaps 1/sqrt 5", 0.0, worst, tol));

    let ext = ctx.group(true)?;
    let o = ctx.orbit()?;
    out.push(Claim::exact("orbit.extended_order", "extended Clifford group", 1536, ext.order()));
    out.push(Claim::exact("orbit.unitary_order", "unitary Clifford group", 768, ext.unitary_indices().len()));
    let images: BTreeSet<usize> = ext.elements().iter().filter_map(|g| o.image(&g.op, 0)).collect();
    out.push(Claim::exact("orbit.distinct_fiducials", "fiducial orbit", 256, images.len()));
    let mut sics = 0;
    for label in 1..=NUM_SICS {
        if verify_sic(o.sic_states(label)?, 4, ctx.tol)?.is_sic {
            sics += 1;
        }
    }
    out.push(Claim::exact("orbit.sic_count", "SICs in the orbit", 16, sics));

    let stab = stability_group(o, ext, o.projector(0), ctx.tol)?;
    let unitary = stab.iter().filter(|&&k| !ext.element(k).op.antiunitary).count();
    out.push(Claim::exact("orbit.stabilizer_order", "stability group", 6, stab.len()));
    out.push(Claim::exact("orbit.stabilizer_unitary_order", "stability group", 3, unitary));
    out.push(Claim::exact("orbit.orbit_stabilizer", "orbit-stabilizer", ext.order(), o.len() * stab.len()));

    let gen = to_operator(&stabilizer_generator())?;
    let mut p = DisplacementIndex::new(0, 1, 4);
    let mut cycle = Vec::new();
    for _ in 0..6 {
        p = conjugation_action(&gen, p, ctx.tol)?.image;
        cycle.push([p.p1, p.p2]);
    }
    out.push(Claim::exact(
        "orbit.conjugation_cycle",
        "stabilizer generator on displacements",
        [[1, 2], [1, 3], [2, 1], [3, 0], [1, 1], [0, 1]],
        cycle,
    ));
    let cycles = stabilizer_orbits_within_sic(o, &gen.op.pow(2), 1)?;
    let mut got: Vec<Vec<[usize; 2]>> = cycles
        .iter()
        .map(|c| {
            let mut v: Vec<[usize; 2]> = c.iter().map(|p| [p.p1, p.p2]).collect();
            v.sort();
            v
        })
        .collect();
    got.sort();
    let expected: Vec<Vec<[usize; 2]>> = vec![
        vec![[0, 1], [1, 3], [3, 0]],
        vec![[0, 2], [2, 0], [2, 2]],
        vec![[0, 3], [1, 0], [3, 1]],
        vec![[1, 1], [1, 2], [2, 1]],
        vec![[2, 3], [3, 2], [3, 3]],
    ];
    out.push(Claim::exact("orbit.stabilizer_orbits", "stabilizer orbits in SIC 1", expected, got));
    Ok(out)
}

pub fn symmetry(ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let o = ctx.orbit()?;
    let ext = ctx.group(true)?;
    let s = SicSymmetryGroup::compute(o, ext, 1)?;
    out.push(Claim::exact("symmetry.order", "symmetry group of SIC 1", 96, s.order()));
    out.push(Claim::exact("symmetry.unitary_order", "symmetry group of SIC 1", 48, s.unitary_order()));
    let st = s.structure()?;
    out.push(Claim::exact("symmetry.unique_order16_subgroup", "order-16 subgroup", true, st.unique_order16_subgroup));
    out.push(Claim::exact(
        "symmetry.order16_is_displacements",
        "order-16 subgroup",
        true,
        st.order16_subgroup_is_displacements,
    ));
    out.push(Claim::exact(
        "symmetry.sic_element_orders",
        "element orders of the SIC 1 group",
        BTreeMap::from([(1, 1), (2, 3), (3, 32), (4, 12)]),
        &st.order_census,
    ));
    let cert = certify_stabilizer(o, &s, ctx.tol.abs())?;
    out.push(Claim::exact("symmetry.stabilizer_realized", "triple-preserving stabilizer", true, cert.all_realized));

    let r = label_action_report(o, ext)?;
    out.push(Claim::exact("symmetry.label_permutations", "action on SIC labels", 48, r.unitary_permutations));
    out.push(Claim::exact("symmetry.label_permutations_extended", "action on SIC labels", 96, r.extended_permutations));
    out.push(Claim::exact("symmetry.label_kernel", "action on SIC labels", 16, r.kernel_order));
    out.push(Claim::exact(
        "symmetry.label_order_census",
        "action on SIC labels",
        BTreeMap::from([(1, 1), (2, 7), (3, 8), (4, 24), (6, 8)]),
        &r.order_census,
    ));
    out.push(Claim::exact("symmetry.rows_to_rows", "action on SIC labels", true, r.rows_to_rows));
    out.push(Claim::exact("symmetry.central_swaps_rows", "central involution", true, r.central_swaps_rows));
    out.artifacts.insert("label_classes".into(), json!(r.classes));
    out.artifacts.insert("central_involutions".into(), json!(r.central_involutions));
    Ok(out)
}

pub fn triples(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol.abs();
    let mut out = Outcome::default();
    let o = ctx.orbit()?;
    let c = TripleTraceCensus::compute(o.sic_states(1)?, 1e-6);
    out.push(Claim::exact("triples.distinct_values", "triple-trace census", 17, c.len()));
    out.push(Claim::exact("triples.real_values", "triple-trace census", 1, c.real_count(tol)));
    out.push(Claim::exact("triples.conjugate_pairs", "triple-trace census", 8, c.conjugate_pairs(tol)));
    let modulus = 1.0 / (5.0 * 5f64.sqrt());
    let worst = c.values.iter().map(|z| (z.norm() - modulus).abs()).fold(0.0, f64::max);
    out.push(Claim::approx("triples.modulus_deviation", "triple-trace modulus", 0.0, worst, tol));
    let mut same = 0;
    for label in 1..=NUM_SICS {
        if c.same_multiset(&TripleTraceCensus::compute(o.sic_states(label)?, 1e-6), tol) {
            same += 1;
        }
    }
    out.push(Claim::exact("triples.same_for_all_sics", "triple-trace census", 16, same));

    let mut fid_dev: f64 = 0.0;
    let mut phase_dev: f64 = 0.0;
    let mut monotone = true;
    for d in [3usize, 4, 5] {
        let target = 1.0 / (d as f64 + 1.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let theta = -PI + 2.0 * PI * (k as f64 + 0.5) / 100.0;
            let kets = triple_family(d, theta)?;
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                fid_dev = fid_dev.max((inner(&kets[a], &kets[b]).norm_sqr() - target).abs());
            }
            let rho: Vec<ComplexMatrix> = kets.iter().map(|k| ComplexMatrix::outer(k)).collect();
            let phi = triple_phase(d, theta)?;
            let arg = triple_trace(&rho[0], &rho[1], &rho[2]).arg();
            phase_dev = phase_dev.max(((arg - phi + PI).rem_euclid(2.0 * PI) - PI).abs());
            monotone &= phi > prev;
            prev = phi;
        }
    }
    out.push(Claim::approx("triples.family_fidelity_deviation", "equal-fidelity triples", 0.0, fid_dev, 1e-10));
    out.push(Claim::approx("triples.family_phase_deviation", "equal-fidelity triples", 0.0, phase_dev, 1e-10));
    out.push(Claim::exact("triples.family_phase_monotone", "equal-fidelity triples", true, monotone));
    out.push(Claim::exact(
        "triples.generic_not_in_census",
        "non-extendable triples",
        true,
        !c.contains_phase(triple_phase(4, 0.3)?, 1e-6),
    ));
    let census: Vec<Value> = c
        .values
        .iter()
        .zip(&c.multiplicity)
        .map(|(z, m)| json!({"re": z.re, "im": z.im, "count": m}))
        .collect();
    out.artifacts.insert("triple_census".into(), Value::Array(census));
    Ok(out)
}

pub fn reconstruct(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol.abs();
    let mut out = Outcome::default();
    if let Some(sic) = &ctx.input {
        let report = verify_sic(&sic.states, sic.d, ctx.tol).context("input is not a set of 4x4 states")?;
        out.push(Claim::exact("reconstruct.input_is_sic", "input SIC", true, report.is_sic));
        if !report.is_sic {
            return Ok(out);
        }
        let r = reconstruct_hw(sic, ctx.tol)?;
        out.push(Claim::exact("reconstruct.input_covariant", "reconstructed group", true, r.covariant));
        let family = if projective_set_eq(&r.group, &standard_group()) {
            "standard"
        } else if projective_set_eq(&r.group, &dprime_generators().group()) {
            "regrouped"
        } else {
            "other"
        };
        out.artifacts.insert("group_family".into(), json!(family));
        out.artifacts.insert("z_prime".into(), json!(r.z_prime));
        out.artifacts.insert("x_prime".into(), json!(r.x_prime));
        out.artifacts.insert("commutator".into(), json!([r.commutator.re, r.commutator.im]));
        return Ok(out);
    }

    let rho = ComplexMatrix::outer(&fiducial_ket_d4());
    let z = phase(4);
    let m = (0..4).fold(ComplexMatrix::zeros(4), |acc, j| &acc + &z.pow(j).conjugate(&rho));
    let e = eig_hermitian(&m, ctx.tol)?;
    let sig = EigSignature::from_unsorted([e.values[0], e.values[1], e.values[2], e.values[3]]);
    let dev = sig.lambdas.iter().zip(reference_signature().lambdas).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.push(Claim::approx("reconstruct.eigenvalue_deviation", "Z-orbit eigenvalues", 0.0, dev, 1e-10));
    out.push(Claim::approx("reconstruct.eigenvalue_sum", "Z-orbit eigenvalues", 4.0, sig.sum(), tol));

    let scan = signature_scan(ctx.orbit()?, 1, ctx.tol)?;
    out.push(Claim::exact("reconstruct.signature_classes", "quadruple spectra in SIC 1", 25, scan.signatures.len()));
    out.push(Claim::exact("reconstruct.matching_quadruples", "quadruple spectra in SIC 1", 24, scan.matching));
    out.push(Claim::exact("reconstruct.matching_are_orbits", "quadruple spectra in SIC 1", true, scan.matching_are_order4_orbits));

    let o = ctx.orbit()?;
    let d = standard_group();
    let mut originals = 0;
    for label in 1..=NUM_SICS {
        let r = reconstruct_hw(&o.sic(label)?, ctx.tol)?;
        if r.covariant && projective_set_eq(&r.group, &d) {
            originals += 1;
        }
    }
    out.push(Claim::exact("reconstruct.originals_give_standard", "reconstruction", 16, originals));
    let dp = dprime_generators().group();
    let mut regrouped = 0;
    for g in regroup_all(o, ctx.tol)? {
        let r = reconstruct_hw(&g.to_povm(o), ctx.tol)?;
        if r.covariant && projective_set_eq(&r.group, &dp) {
            regrouped += 1;
        }
    }
    out.push(Claim::exact("reconstruct.regrouped_give_dprime", "reconstruction", 16, regrouped));
    Ok(out)
}

pub fn regroup(ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    let o = ctx.orbit()?;
    let all = regroup_all(o, ctx.tol)?;
    out.push(Claim::exact("regroup.count", "regrouped SICs", 16, all.len()));
    let mut valid = 0;
    for g in &all {
        if verify_sic(&g.to_povm(o).states, 4, ctx.tol)?.is_sic {
            valid += 1;
        }
    }
    out.push(Claim::exact("regroup.valid", "regrouped SICs", 16, valid));
    let scan = exhaustive_regroup_scan(o, ctx.full_scan, ctx.tol)?;
    out.push(Claim::exact("regroup.row_cliques", "clique scan per row", [8, 8, 8, 8], scan.per_row));
    out.push(Claim::exact("regroup.others_found", "clique scan per row", 0, scan.others_found));
    if ctx.full_scan {
        out.push(Claim::exact("regroup.census_total", "clique scan over all states", Some(32), scan.full_total));
        out.push(Claim::exact("regroup.each_state_in_two", "clique scan over all states", Some(true), scan.each_state_in_two));
    }
    let eq = equivalence_report(o, ctx.tol)?;
    out.push(Claim::approx("regroup.u_unitarity_deviation", "equivalence unitary", 0.0, eq.unitarity_deviation, ctx.tol.abs()));
    out.push(Claim::exact("regroup.u_fixes_fiducial", "equivalence unitary", true, eq.fixes_fiducial));
    out.push(Claim::exact("regroup.u_maps_d_to_dprime", "equivalence unitary", true, eq.conjugates_d_to_dprime));
    out.push(Claim::exact("regroup.u_maps_families", "equivalence unitary", true, eq.maps_originals_to_regrouped));
    let census = hw_conjugate_subgroup_census(ctx.group(false)?)?;
    out.push(Claim::exact("regroup.subgroup_total", "displacement-like subgroups", 32, census.total));
    out.push(Claim::exact("regroup.subgroup_normal", "displacement-like subgroups", 2, census.normal));
    out.push(Claim::exact("regroup.normal_are_d_and_dprime", "displacement-like subgroups", true, census.normal_are_d_and_dprime));
    let members: Vec<Value> = all
        .iter()
        .map(|g| json!({"row": g.row + 1, "members": g.members.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")}))
        .collect();
    out.artifacts.insert("regrouped".into(), Value::Array(members));
    Ok(out)
}

pub fn twoqubit(ctx: &Context) -> Result<Outcome> {
    let tol = ctx.tol.abs();
    let basis = ctx.basis;
    let mut out = Outcome::default();
    let o = ctx.orbit()?;
    let a = TwoQubitAnalysis::compute(o, basis, ctx.tol)?;
    let counts = a.class_counts();
    out.push(Claim::exact("twoqubit.class1_count", "sign-pattern classes", 128, counts.get(&1).copied().unwrap_or(0)));
    out.push(Claim::exact("twoqubit.class2_count", "sign-pattern classes", 128, counts.get(&2).copied().unwrap_or(0)));
    let split = a.sics.iter().filter(|s| s.classes == [if s.label <= 8 { 1 } else { 2 }]).count();
    out.push(Claim::exact("twoqubit.class_by_sic", "classes 1-8 / 9-16", 16, split));
    out.push(Claim::exact("twoqubit.sign_table", "sign functions per SIC", true, a.reproduces_sign_table()));
    let worst_purity = a.sics.iter().map(|s| s.avg_purity).max_by(|x, y| (x - 0.8).abs().total_cmp(&(y - 0.8).abs()));
    out.push(Claim::approx("twoqubit.avg_purity", "average reduced purity", 0.8, worst_purity.unwrap_or(f64::NAN), tol));
    let worst_norm = a.fiducials.iter().map(|f| f.gbv_norm_sq).max_by(|x, y| (x - 3.0).abs().total_cmp(&(y - 3.0).abs()));
    out.push(Claim::approx("twoqubit.gbv_norm", "pure-state Bloch norm", 3.0, worst_norm.unwrap_or(f64::NAN), 1e-9));

    // one class carries a single concurrence, the other splits 8/8
    let (uniform_class, split_class) = if basis == Basis::Product { (1, 2) } else { (2, 1) };
    let mid = (2.0f64 / 5.0).sqrt();
    let g = SicConstants::new().g;
    let (low, high) = (((2.0 - 2.0 * g.sqrt()) / 5.0).sqrt(), ((2.0 + 2.0 * g.sqrt()) / 5.0).sqrt());
    let uniform_labels: Vec<usize> = if uniform_class == 1 { (1..=8).collect() } else { (9..=16).collect() };
    let split_labels: Vec<usize> = (1..=NUM_SICS).filter(|l| !uniform_labels.contains(l)).collect();
    let worst_mid = a
        .fiducials
        .iter()
        .filter(|f| uniform_labels.contains(&f.label))
        .map(|f| f.concurrence)
        .max_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .unwrap_or(f64::NAN);
    out.push(Claim::approx(&format!("twoqubit.class{uniform_class}_concurrence"), "uniform concurrence", mid, worst_mid, tol));
    let mut histograms = Vec::new();
    let mut split_ok = 0;
    for label in 1..=NUM_SICS {
        let c = concurrence_census(o, label, basis)?;
        if split_labels.contains(&label) && c.count_near(high, tol) == 8 && c.count_near(low, tol) == 8 {
            split_ok += 1;
        }
        histograms.push(json!({"label": label, "bins": c.bins}));
    }
    out.push(Claim::exact(&format!("twoqubit.class{split_class}_concurrence_split"), "8/8 concurrence split", 8, split_ok));

    if basis == Basis::Product {
        let cube = reduced_state_census(o, 1, basis, 1e-7)?;
        let edge = cube.second.cube.map(|c| c.edge).unwrap_or(f64::NAN);
        out.push(Claim::approx("twoqubit.cube_edge", "second-qubit reduced states of SIC 1", 2.0 / 5f64.sqrt(), edge, 1e-9));
        let mut paired = 0;
        for label in 1..=NUM_SICS {
            let r = reduced_state_census(o, label, basis, 1e-7)?;
            let ok = |q: &sic4::two_qubit::QubitCensus| q.points.len() == 8 && q.multiplicities.iter().all(|&m| m == 2);
            if ok(&r.first) && ok(&r.second) {
                paired += 1;
            }
        }
        out.push(Claim::exact("twoqubit.reduced_states_paired", "8 reduced states per qubit, 2 each", 16, paired));
        let patterns = violating_patterns();
        let mut holds = 0;
        for p in &patterns {
            if partial_transpose_simplex_check(o, p, ctx.tol)?.holds(tol) {
                holds += 1;
            }
        }
        out.push(Claim::exact("twoqubit.simplex_patterns", "constraint-violating patterns", 128, patterns.len()));
        out.push(Claim::exact("twoqubit.simplex_checks", "partial-transpose simplex", 128, holds));
        let x = displacement(DisplacementIndex::new(1, 0, 4), 4);
        out.push(Claim::exact("twoqubit.shift_is_nonlocal", "operator-Schmidt rank of X", true, operator_schmidt_rank(&x, 1e-9)? > 1));
    }

    let rows: Vec<Value> = a
        .fiducials
        .iter()
        .map(|f| {
            let p = &f.pattern;
            json!({
                "index": f.index, "sic": f.label, "class": p.class_id,
                "a": p.a, "b": p.b,
                "alpha1": p.alpha[0], "alpha2": p.alpha[1], "alpha3": p.alpha[2],
                "beta1": p.beta[0], "beta2": p.beta[1], "beta3": p.beta[2],
                "h1": f.signs.h1, "h2": f.signs.h2, "h3": f.signs.h3,
                "concurrence": f.concurrence,
            })
        })
        .collect();
    out.artifacts.insert("sign_patterns".into(), Value::Array(rows));
    out.artifacts.insert("concurrence_histograms".into(), Value::Array(histograms));
    Ok(out)
}

pub fn all(ctx: &Context) -> Result<Outcome> {
    let mut out = Outcome::default();
    for run in [orbit, symmetry, triples, reconstruct, regroup, twoqubit] {
        out.extend(run(ctx)?);
    }
    Ok(out)
}

/// Reads a SIC from JSON: `{"d": 4, "states": [{"dim": 4, "entries": [[re, im], ...]}, ...]}`.
pub fn read_input(text: &str) -> Result<SicPovm> {
    let sic: SicPovm = serde_json::from_str(text).context("malformed SIC JSON")?;
    if sic.d != 4 || sic.states.iter().any(|s| s.dim() != 4) {
        bail!("input SIC must consist of 4x4 matrices");
    }
    Ok(sic)
}
