mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stabrad::perturbation::inner_factored;
use stabrad::{fro_norm_factored, Perturbation, C64};

#[test]
fn rank_mismatch_rejected() {
    assert!(Perturbation::new(DMatrix::<f64>::zeros(2, 2), DMatrix::zeros(3, 1)).is_err());
}

#[test]
fn normalizing_zero_fails() {
    assert!(Perturbation::normalized(DMatrix::<f64>::zeros(2, 2), DMatrix::zeros(3, 2)).is_none());
}

#[test]
fn near_cancelling_factors_normalize_accurately() {
    // U Vᵀ = a·c + b·d with a·c ≈ −b·d.
    let u = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let v = DMatrix::from_row_slice(1, 2, &[1.0, -1.0 + 1e-9]);
    let p = Perturbation::normalized(u, v).unwrap();
    assert_relative_eq!(p.to_dense().norm(), 1.0, max_relative = 1e-6);
}

#[test]
fn interpolation_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = Perturbation::normalized(common::randn(&mut rng, 3, 2), common::randn(&mut rng, 4, 2)).unwrap();
    let b = Perturbation::normalized(common::randn(&mut rng, 3, 2), common::randn(&mut rng, 4, 2)).unwrap();
    assert!((a.interpolate(&b, 0.0).unwrap().to_dense() - a.to_dense()).norm() < 1e-14);
    assert!((a.interpolate(&b, 1.0).unwrap().to_dense() - b.to_dense()).norm() < 1e-14);
    assert_relative_eq!(a.interpolate(&b, 0.3).unwrap().fro_norm(), 1.0, max_relative = 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn factored_norm_and_inner(seed in 0u64..100_000, p in 1usize..7, m in 1usize..7, r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u1, v1) = (common::randn(&mut rng, p, r), common::randn(&mut rng, m, r));
        let (u2, v2) = (common::randn(&mut rng, p, r), common::randn(&mut rng, m, r));
        let (e1, e2) = (&u1 * v1.transpose(), &u2 * v2.transpose());
        prop_assert!((fro_norm_factored(&u1, &v1) - e1.norm()).abs() <= 1e-12 * e1.norm().max(1.0));
        let want = e1.dot(&e2);
        prop_assert!((inner_factored(&u1, &v1, &u2, &v2) - want).abs() <= 1e-12 * e1.norm() * e2.norm());
    }

    #[test]
    fn complex_factored_norm(seed in 0u64..100_000, p in 1usize..6, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut ChaCha8Rng, r| {
            let re = common::randn(rng, r, 1);
            let im = common::randn(rng, r, 1);
            DMatrix::from_fn(r, 1, |i, _| C64::new(re[(i, 0)], im[(i, 0)]))
        };
        let (u, v) = (mk(&mut rng, p), mk(&mut rng, m));
        let e = &u * v.adjoint();
        prop_assert!((fro_norm_factored(&u, &v) - e.norm()).abs() <= 1e-12 * e.norm());
    }

    #[test]
    fn normalized_has_unit_norm_and_same_direction(seed in 0u64..100_000, p in 1usize..6, m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = (common::randn(&mut rng, p, 2), common::randn(&mut rng, m, 2));
        let e = &u * v.transpose();
        let n = Perturbation::normalized(u, v).unwrap();
        prop_assert!((n.fro_norm() - 1.0).abs() < 1e-13);
        prop_assert!((n.to_dense() * e.norm() - e).norm() <= 1e-12 * n.to_dense().norm().max(1.0) * 10.0);
        let padded = n.with_rank(4);
        prop_assert_eq!(padded.rank(), 4);
        prop_assert!((padded.to_dense() - n.to_dense()).norm() == 0.0);
        prop_assert!((n.negated().to_dense() + n.to_dense()).norm() == 0.0);
        prop_assert!((n.flipped().to_dense() - n.to_dense()).norm() == 0.0);
    }
}
