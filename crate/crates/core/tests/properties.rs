//! Randomized invariants of the operator algebra and the Clifford map.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sic4::clifford_group::{to_operator, SymplecticPair};
use sic4::numerics::{eig_hermitian, ComplexMatrix, GroupElement, Tolerance, C64};
use sic4::weyl_heisenberg::{displacement, displacement_lifted, symplectic_form, tau_pow, weyl_commutation_check, DisplacementIndex};

fn random_unitary(rng: &mut StdRng, n: usize) -> ComplexMatrix {
    // Gram-Schmidt on random complex columns
    let mut cols: Vec<Vec<C64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        for c in &cols {
            let p: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= p * y;
            }
        }
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-3 {
            cols.push(v.into_iter().map(|z| z / nrm).collect());
        }
    }
    ComplexMatrix::from_fn(n, |r, c| cols[c][r])
}

fn random_element(rng: &mut StdRng, n: usize) -> GroupElement {
    GroupElement::new(random_unitary(rng, n), rng.gen_bool(0.5), Tolerance::default()).unwrap()
}

fn random_hermitian(rng: &mut StdRng, n: usize) -> ComplexMatrix {
    let m = ComplexMatrix::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let h = &m + &m.adjoint();
    h.scale(C64::new(0.5, 0.0))
}

fn random_pair(rng: &mut StdRng, d: usize) -> SymplecticPair {
    let db = 2 * d as i64;
    loop {
        let f = [[rng.gen_range(0..db), rng.gen_range(0..db)], [rng.gen_range(0..db), rng.gen_range(0..db)]];
        let chi = [rng.gen_range(0..d as i64), rng.gen_range(0..d as i64)];
        if let Ok(p) = SymplecticPair::new(f, chi, d) {
            return p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_associative(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (a, b, c) = (random_element(&mut rng, n), random_element(&mut rng, n), random_element(&mut rng, n));
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert_eq!(left.antiunitary, right.antiunitary);
        prop_assert!(left.matrix.max_abs_diff(&right.matrix) < 1e-12);
    }

    #[test]
    fn inverse_cancels(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = random_element(&mut rng, n);
        let id = GroupElement::identity(n);
        prop_assert!(g.compose(&g.inverse()).unwrap().proj_equal(&id, Tolerance::default()).unwrap());
        prop_assert!(g.inverse().compose(&g).unwrap().proj_equal(&id, Tolerance::default()).unwrap());
    }

    #[test]
    fn apply_preserves_norm(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = random_element(&mut rng, n);
        let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let before: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let after: f64 = g.apply(&v).unwrap().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn eigen_trace_and_round_trip(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let e = eig_hermitian(&h, Tolerance::default()).unwrap();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - h.trace().re).abs() < 1e-9);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let mut rebuilt = ComplexMatrix::zeros(n);
        for (lam, v) in e.values.iter().zip(&e.vectors) {
            rebuilt = &rebuilt + &ComplexMatrix::outer(v).scale(C64::new(*lam, 0.0));
        }
        prop_assert!(rebuilt.max_abs_diff(&h) < 1e-9);
    }

    #[test]
    fn eigenvalues_agree_with_nalgebra(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = StdRng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let ours = eig_hermitian(&h, Tolerance::default()).unwrap().values;
        let m = DMatrix::<Complex64>::from_fn(n, n, |r, c| h[(r, c)]);
        let mut theirs: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn displacement_adjoint_is_inverse_displacement(p1 in 0i64..4, p2 in 0i64..4) {
        let p = DisplacementIndex::new(p1, p2, 4);
        let dp = displacement(p, 4);
        let dm = displacement(p.neg(4), 4);
        prop_assert!(sic4::numerics::proj_equal(&dp.adjoint(), &dm, Tolerance::default()).unwrap());
        prop_assert!(dp.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn weyl_relation_on_random_pairs(p in (0i64..4, 0i64..4), q in (0i64..4, 0i64..4)) {
        let (p, q) = (DisplacementIndex::new(p.0, p.1, 4), DisplacementIndex::new(q.0, q.1, 4));
        let lhs = &displacement(p, 4) * &displacement(q, 4);
        let lifted = displacement_lifted(p.p1 as i64 + q.p1 as i64, p.p2 as i64 + q.p2 as i64, 4);
        let rhs = lifted.scale(tau_pow(symplectic_form(p, q), 4));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        let reduced = displacement(p.add(q, 4), 4);
        prop_assert!(sic4::numerics::proj_equal(&lhs, &reduced, Tolerance::default()).unwrap());
    }
}

#[test]
fn weyl_commutation_holds_for_small_dimensions() {
    for d in 2..=6 {
        assert!(weyl_commutation_check(d, Tolerance::default()), "d = {d}");
    }
}

#[test]
fn clifford_map_is_a_projective_homomorphism() {
    let mut rng = StdRng::seed_from_u64(0x51c4);
    let tol = Tolerance::default();
    for _ in 0..1000 {
        let (s, t) = (random_pair(&mut rng, 4), random_pair(&mut rng, 4));
        let lhs = to_operator(&s.compose(&t).unwrap()).unwrap().op;
        let rhs = to_operator(&s).unwrap().op.compose(&to_operator(&t).unwrap().op).unwrap();
        assert!(lhs.proj_equal(&rhs, tol).unwrap(), "{s} o {t}");
    }
}
