mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use stabrad::oracle::{complex_grid, mu_eckart, siso_grid, FrequencyResponse};
use stabrad::{transfer_eval, Domain, StateSpaceSystem, C64};

#[test]
fn zero_matrix_has_no_destabilizer() {
    let r = mu_eckart(&DMatrix::zeros(3, 2));
    assert_eq!(r.mu, 0.0);
    assert!(r.delta.is_none());
    assert_eq!(r.delta_fro, f64::INFINITY);
}

proptest! {
    #[test]
    fn eckart_minimizer_has_equal_norms(seed in 0u64..1000) {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let h = common::randn(&mut rng, 4, 3);
        let r = mu_eckart(&h);
        let inv = 1.0 / r.mu;
        prop_assert!((r.delta_fro - inv).abs() <= 1e-12 * inv);
        prop_assert!((r.delta_spec - inv).abs() <= 1e-12 * inv);
        prop_assert!(r.det_residual <= 1e-12);
        prop_assert_eq!(r.delta.unwrap().shape(), (3, 4));
    }
}

#[test]
fn scalar_grids() {
    let c = StateSpaceSystem::scalar(-1.0, 1.0, 1.0, 0.0, Domain::Continuous);
    assert!((complex_grid(&c).unwrap().radius - 1.0).abs() < 1e-12);
    assert!((siso_grid(&c).unwrap().radius - 1.0).abs() < 1e-12);
    let d = StateSpaceSystem::scalar(0.5, 1.0, 1.0, 0.0, Domain::Discrete);
    assert!((siso_grid(&d).unwrap().radius - 0.5).abs() < 1e-12);
    assert!((complex_grid(&d).unwrap().radius - 0.5).abs() < 1e-12);
}

#[test]
fn feedthrough_caps_the_grid_radius() {
    let sys = StateSpaceSystem::scalar(-1.0, 1.0, -0.1, 0.5, Domain::Continuous);
    let o = siso_grid(&sys).unwrap();
    assert_eq!(o.radius, 2.0);
    assert!(o.omega.is_none());
}

#[test]
fn frequency_response_matches_direct_solve() {
    for seed in 0..6u64 {
        let domain = if seed % 2 == 0 { Domain::Continuous } else { Domain::Discrete };
        let sys = common::random_system(seed, 9, 2, 3, domain, true);
        let fr = FrequencyResponse::new(&sys).unwrap();
        for w in [0.0, 0.3, 1.7, 3.0] {
            let s = fr.boundary_point(w);
            let a = fr.eval(s).unwrap();
            let b = transfer_eval(&sys, s).unwrap();
            assert!((a - &b).norm() <= 1e-10 * b.norm().max(1.0));
        }
        assert_eq!(fr.boundary_point(0.0), C64::new(1.0 - (domain == Domain::Continuous) as u8 as f64, 0.0));
    }
}

#[test]
fn oracle_rejects_large_systems() {
    let n = stabrad::oracle::MAX_ORACLE_DIM + 1;
    let sys = StateSpaceSystem::new(
        DMatrix::identity(n, n) * -1.0,
        DMatrix::zeros(n, 1),
        DMatrix::zeros(1, n),
        DMatrix::zeros(1, 1),
        Domain::Continuous,
    )
    .unwrap();
    assert!(complex_grid(&sys).is_err());
}
