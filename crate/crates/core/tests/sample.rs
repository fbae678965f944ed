mod common;

use nalgebra::DMatrix;
use stabrad::sample::{sample_point_cloud, SampleCounts, SampleSource};
use stabrad::{solve, Domain, HecConfig, StateSpaceSystem, Status};

#[test]
fn deterministic_per_seed() {
    let sys = common::random_system(1, 5, 2, 2, Domain::Continuous, true);
    let counts = SampleCounts { randn: 50, sobol: 50, perturbed: 0 };
    let a = sample_point_cloud(&sys, 0.3, counts, 9, &[]).unwrap();
    let b = sample_point_cloud(&sys, 0.3, counts, 9, &[]).unwrap();
    let c = sample_point_cloud(&sys, 0.3, counts, 10, &[]).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 100 * sys.n());
    assert_eq!(a.iter().filter(|p| p.source == SampleSource::Sobol).count(), 50 * sys.n());
}

#[test]
fn perturbed_needs_a_base() {
    let sys = common::random_system(2, 4, 1, 1, Domain::Continuous, false);
    let counts = SampleCounts { randn: 0, sobol: 0, perturbed: 10 };
    assert!(sample_point_cloud(&sys, 0.3, counts, 0, &[]).unwrap().is_empty());
}

#[test]
fn eps_beyond_cap_is_rejected() {
    let sys = StateSpaceSystem::scalar(-1.0, 1.0, 1.0, 0.5, Domain::Continuous);
    assert!(sample_point_cloud(&sys, 2.5, SampleCounts { randn: 1, sobol: 0, perturbed: 0 }, 0, &[]).is_err());
}

#[test]
fn rotation_cloud_merges_onto_the_imaginary_axis() {
    let sys = StateSpaceSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
        Domain::Continuous,
    )
    .unwrap();
    let counts = SampleCounts { randn: 500, sobol: 500, perturbed: 0 };
    let pts = sample_point_cloud(&sys, 1.0, counts, 0, &[]).unwrap();
    // M(δ) has eigenvalues ±i·sqrt(1 + δ) with δ ∈ [−1, 1].
    let half = 2f64.sqrt();
    for p in &pts {
        // δ = −1 makes 0 a defective double eigenvalue, which rounding in δ
        // splits by about the square root of machine precision.
        let tol = if p.im.abs() > 1e-6 { 1e-8 } else { 1e-7 };
        assert!(p.re.abs() <= tol, "{p:?}");
        assert!(p.im.abs() <= half + 1e-8);
    }
    assert!(pts.iter().any(|p| p.im.abs() < 0.1));
    assert!(pts.iter().any(|p| p.im.abs() > half - 1e-6));
}

#[test]
fn solver_dominates_samples() {
    let cfg = HecConfig::default();
    for seed in 0..3u64 {
        let sys = common::random_system(40 + seed, 6, 2, 2, Domain::Continuous, false);
        let r = solve::<f64>(&sys, &cfg).unwrap();
        assert_eq!(r.status, Status::ConvergedToTolerance);
        let counts = SampleCounts { randn: 1000, sobol: 1000, perturbed: 1000 };
        let pts = sample_point_cloud(&sys, r.eps_final, counts, seed, &[r.pert_final.clone()]).unwrap();
        let best = pts.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(best <= r.lambda_final.re + 1e-8, "seed {seed}: {best:e} vs {:e}", r.lambda_final.re);
    }
}
