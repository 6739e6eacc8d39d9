use std::f64::consts::PI;

use bosonize_core::linalg::{rank_one_sqrt, sherman_morrison, sym_func};
use bosonize_core::onebody::random_instance;
use bosonize_core::quad::Quadrature;
use bosonize_core::{Fault, SymOp};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spd(dim: usize, seed: u64) -> SymOp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
    SymOp::symmetrized(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn repulsive_instances(seed in any::<u64>(), dim in 1usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_instance(&mut rng, dim, 1.0, Fault::None).unwrap();
        let hmax = b.h.max_abs();
        prop_assert!(b.diagonalization_residual() <= 1e-9 * hmax);
        prop_assert!(b.isospectral_deviation() <= 1e-9);
        prop_assert!(b.conjugation_residual() <= 1e-8 * hmax);
        prop_assert!(b.orthogonality_residual() <= 1e-10);
        prop_assert!(b.ordering_min_eigenvalue() >= -1e-10 * hmax);
        prop_assert!(b.sign_structure_min() >= -1e-12);
        let (lhs, rhs) = b.trace_formula_check().unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-7 * rhs.abs().max(1e-300), "{} vs {}", lhs, rhs);
        for r in b.verify_element_bounds() {
            prop_assert!(r.max_violation <= 1e-10, "{:?}", r);
        }
    }

    #[test]
    fn attractive_instances(seed in any::<u64>(), dim in 1usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_instance(&mut rng, dim, -1.0, Fault::None).unwrap();
        prop_assert!(b.admissible && b.margin > 0.0);
        prop_assert!(b.diagonalization_residual() <= 1e-9 * b.h.max_abs());
        prop_assert!(b.sign_structure_min() >= -1e-12);
        for r in b.verify_element_bounds() {
            prop_assert!(r.max_violation <= 1e-10, "{:?}", r);
        }
    }

    #[test]
    fn improper_integrals(a in 0.5f64..100.0, b in 0.5f64..100.0) {
        let q = Quadrature::default();
        let one = q.integrate_semi_infinite(|t| a / (a * a + t * t), a).unwrap().value;
        prop_assert!((one / (PI / 2.0) - 1.0).abs() < 1e-10);
        let two = q.integrate_semi_infinite(|t| t * t / ((a * a + t * t) * (b * b + t * t)), (a * b).sqrt()).unwrap().value;
        prop_assert!((two * 2.0 * (a + b) / PI - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exp_log_round_trip(seed in any::<u64>(), dim in 1usize..=12) {
        let a = spd(dim, seed);
        let back = sym_func(&sym_func(&a, f64::ln).unwrap(), f64::exp).unwrap();
        prop_assert!(back.sub(&a).max_abs() <= 1e-11 * a.max_abs());
    }
}

#[test]
fn sherman_morrison_matches_inverse() {
    for (seed, g) in [(1, 0.7), (2, -0.2), (3, 3.0)] {
        let a = spd(9, seed);
        let w = DVector::from_fn(9, |i, _| 0.1 * (i as f64 + 1.0).sqrt());
        let ainv = SymOp::symmetrized(a.matrix().clone().try_inverse().unwrap());
        let sm = sherman_morrison(&ainv, g, &w).unwrap();
        let direct = a.add(&SymOp::rank_one(&w, g)).matrix().clone().try_inverse().unwrap();
        assert!((sm.matrix() - direct).amax() < 1e-11, "seed {seed}");
    }
}

#[test]
fn rank_one_sqrt_matches_spectral() {
    for (seed, g) in [(4, 0.5), (5, -0.1), (6, 2.0)] {
        let a = spd(8, seed);
        let w = DVector::from_fn(8, |i, _| 0.2 - 0.03 * i as f64);
        let fast = rank_one_sqrt(&a, g, &w).unwrap();
        let dense = sym_func(&a.add(&SymOp::rank_one(&w, g)), f64::sqrt).unwrap();
        assert!(fast.sub(&dense).max_abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn injected_fault_breaks_diagonalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let b = random_instance(&mut rng, 20, 1.0, Fault::FlipKernelSign).unwrap();
    assert!(b.diagonalization_residual() > 1e-9 * b.h.max_abs());
}
