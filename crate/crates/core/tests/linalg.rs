mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stabrad::linalg::{dense_eigenvalues, left_eigenvector, DenseOperator};
use stabrad::{
    extremal_eigentriple, leading_eigentriples, rp_normalize, Domain, EigConfig, EigMethod, Error, Extremal,
    LinearOperator, TiePolicy, C64,
};

fn max_key(vals: &[C64], mode: Extremal) -> f64 {
    vals.iter().map(|&z| mode.key(z)).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn rotation_picks_upper_half_plane() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let op = DenseOperator::from_real(&a);
    let e = extremal_eigentriple(&op, Extremal::Rightmost, None, true, &EigConfig::default()).unwrap();
    assert_relative_eq!(e.lambda.re, 0.0, epsilon = 1e-14);
    assert_relative_eq!(e.lambda.im, 1.0, epsilon = 1e-14);
    assert!(e.residual < 1e-14);
}

#[test]
fn strict_tie_policy_reports_ambiguity() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![
        C64::new(1.0, 2.0),
        C64::new(1.0, -1.0),
        C64::new(-3.0, 0.0),
    ]));
    let op = DenseOperator::from_complex(a);
    let cfg = EigConfig { tie: TiePolicy::Strict, ..EigConfig::default() };
    let r = extremal_eigentriple(&op, Extremal::Rightmost, None, false, &cfg);
    assert!(matches!(r, Err(Error::AmbiguousExtremal { .. })));
    let e = extremal_eigentriple(&op, Extremal::Rightmost, None, false, &EigConfig::default()).unwrap();
    assert_relative_eq!(e.lambda.im, 2.0, epsilon = 1e-14);
}

#[test]
fn outermost_of_discrete_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = common::randn(&mut rng, 9, 9);
    let vals = dense_eigenvalues(&a).unwrap();
    let op = DenseOperator::from_real(&a);
    let e = extremal_eigentriple(&op, Extremal::Outermost, None, true, &EigConfig::default()).unwrap();
    assert_relative_eq!(e.lambda.norm(), max_key(&vals, Extremal::Outermost), max_relative = 1e-12);
    let e = rp_normalize(e, Domain::Discrete).unwrap();
    let yx = e.yx().unwrap();
    // y*x lies on the ray through conj(λ).
    let phase = yx * e.lambda;
    assert!(phase.re > 0.0 && phase.im.abs() <= 1e-12 * phase.norm());
}

#[test]
fn leading_triples_are_distinct_and_sorted() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = common::randn(&mut rng, 10, 10);
    let op = DenseOperator::from_real(&a);
    let es = leading_eigentriples(&op, Extremal::Rightmost, 4, &EigConfig::default()).unwrap();
    assert_eq!(es.len(), 4);
    for w in es.windows(2) {
        assert!(w[0].lambda.re >= w[1].lambda.re);
        assert!((w[0].lambda - w[1].lambda).norm() > 1e-8);
    }
    for e in &es {
        assert!(e.lambda.im >= 0.0);
        assert!(e.residual < 1e-10);
        let y = e.y.as_ref().unwrap();
        let r = op.apply_adjoint(y) - y * e.lambda.conj();
        assert!(r.norm() < 1e-10);
    }
}

fn sparse_test_matrix(n: usize) -> CsrMatrix<f64> {
    // Tridiagonal convection-diffusion type matrix plus a few long-range couplings.
    let mut coo = CooMatrix::new(n, n);
    for i in 0..n {
        coo.push(i, i, -2.0 - 0.01 * i as f64);
        if i + 1 < n {
            coo.push(i, i + 1, 1.3);
            coo.push(i + 1, i, 0.7);
        }
        if i + 17 < n {
            coo.push(i, i + 17, 0.05);
        }
    }
    CsrMatrix::from(&coo)
}

#[test]
fn arnoldi_matches_dense_rightmost() {
    let a = sparse_test_matrix(400);
    let dense: DMatrix<f64> = nalgebra_sparse::convert::serial::convert_csr_dense(&a);
    let vals = dense_eigenvalues(&dense).unwrap();
    let sys = stabrad::StateSpaceSystem::new(
        a,
        DMatrix::zeros(400, 1),
        DMatrix::zeros(1, 400),
        DMatrix::zeros(1, 1),
        Domain::Continuous,
    )
    .unwrap();
    let op = sys.unperturbed();
    let cfg = EigConfig { method: EigMethod::Arnoldi, ..EigConfig::default() };
    let e = extremal_eigentriple(&op, Extremal::Rightmost, None, true, &cfg).unwrap();
    assert_relative_eq!(e.lambda.re, max_key(&vals, Extremal::Rightmost), max_relative = 1e-9);
    assert!(e.residual <= 1e-9 * e.norm_est);
    let y = left_eigenvector(&op, &e, Extremal::Rightmost, &cfg).unwrap();
    let r = op.apply_adjoint(&y) - &y * e.lambda.conj();
    assert!(r.norm() <= 1e-8 * e.norm_est);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rightmost_agrees_with_all_eigenvalues(seed in 0u64..10_000, n in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::randn(&mut rng, n, n);
        let vals = dense_eigenvalues(&a).unwrap();
        let op = DenseOperator::from_real(&a);
        let e = extremal_eigentriple(&op, Extremal::Rightmost, None, true, &EigConfig::default()).unwrap();
        let scale = a.norm().max(1.0);
        prop_assert!((e.lambda.re - max_key(&vals, Extremal::Rightmost)).abs() <= 1e-10 * scale);
        prop_assert!(e.lambda.im >= 0.0);
        prop_assert!(e.residual <= 1e-10 * scale);
        prop_assert!((e.x.norm() - 1.0).abs() < 1e-12);
        let e = rp_normalize(e, Domain::Continuous).unwrap();
        let yx = e.yx().unwrap();
        prop_assert!(yx.re > 0.0 && yx.im.abs() <= 1e-12 * yx.norm());
    }

    #[test]
    fn real_eigenvalues_get_real_vectors(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::randn(&mut rng, 6, 6);
        let a = &s + s.transpose();
        let op = DenseOperator::from_real(&a);
        let e = extremal_eigentriple(&op, Extremal::Rightmost, None, true, &EigConfig::default()).unwrap();
        prop_assert_eq!(e.lambda.im, 0.0);
        prop_assert!(e.x.iter().all(|z| z.im == 0.0));
        prop_assert!(e.y.as_ref().unwrap().iter().all(|z| z.im == 0.0));
    }
}
