mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stabrad::svsa::{polish, uv_direction};
use stabrad::upperbound::initial_perturbation;
use stabrad::{
    contract, g_uv_prime, svsa_expand, Bracket, ContractionCode, Domain, Evaluator, HecConfig, Perturbation,
    StateSpaceSystem, C64,
};

fn measure(ev: &mut Evaluator<'_>, pert: &Perturbation<f64>, eps: f64) -> f64 {
    let e = ev.right(pert, eps).unwrap();
    ev.measure(e.lambda)
}

#[test]
fn derivative_matches_central_differences() {
    let mut eligible = 0;
    let mut good = 0;
    for seed in 0..100u64 {
        let n = 2 + (seed as usize % 11);
        let domain = if seed % 2 == 0 { Domain::Continuous } else { Domain::Discrete };
        let sys = common::random_system(seed, n, 2, 3, domain, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pert = Perturbation::normalized(common::randn(&mut rng, 2, 2), common::randn(&mut rng, 3, 2)).unwrap();
        let eps = 0.3 * sys.cap();
        let mut ev = Evaluator::new(&sys, HecConfig::default().eig);
        let eig = ev.right(&pert, eps).unwrap();
        let Ok(eig) = ev.ensure_left(&pert, eps, eig) else { continue };
        eligible += 1;
        let d = g_uv_prime(&sys, &pert, eps, &eig).unwrap();
        let h = 1e-6 * eps;
        let fd = (measure(&mut ev, &pert, eps + h) - measure(&mut ev, &pert, eps - h)) / (2.0 * h);
        if (d - fd).abs() <= 1e-5 * d.abs().max(1e-8) {
            good += 1;
        }
    }
    assert!(eligible >= 95);
    assert!(good as f64 >= 0.95 * eligible as f64, "{good}/{eligible}");
}

#[test]
fn derivative_equals_update_norm_at_fixed_point() {
    let cfg = HecConfig::default();
    let mut checked = 0;
    for seed in 0..12u64 {
        let domain = if seed % 2 == 0 { Domain::Continuous } else { Domain::Discrete };
        let sys = common::random_system(40 + seed, 6, 2, 2, domain, true);
        let mut ev = Evaluator::new(&sys, cfg.eig.clone());
        let (pert, _) = initial_perturbation::<f64>(&mut ev).unwrap();
        let eps = 0.4 * sys.cap();
        let eig = ev.right(&pert, eps).unwrap();
        let out = svsa_expand(&mut ev, eps, pert, eig, &cfg).unwrap();
        if out.static_point {
            continue;
        }
        let (pert, eig, res) = polish(&mut ev, eps, out.pert, out.eig, 200).unwrap();
        if res > 1e-10 {
            continue;
        }
        let d = g_uv_prime(&sys, &pert, eps, &eig).unwrap();
        let dir = uv_direction(&sys, eps, &pert, &eig).unwrap();
        let yx = eig.yx().unwrap();
        let den = if domain == Domain::Continuous { yx.re } else { yx.norm() };
        let want = dir.norm() / den;
        assert!((d - want).abs() <= 1e-8 * want.abs().max(1.0), "seed {seed}: {d} vs {want}");
        checked += 1;
    }
    assert!(checked >= 10);
}

#[test]
fn scalar_contraction_hits_boundary() {
    // λ(ε) = −1 + ε crosses zero at ε = 1.
    let sys = StateSpaceSystem::scalar(-1.0, 1.0, 1.0, 0.0, Domain::Continuous);
    let cfg = HecConfig::default();
    let pert = Perturbation::new(nalgebra::DMatrix::from_element(1, 1, 1.0), nalgebra::DMatrix::from_element(1, 1, 1.0))
        .unwrap();
    let mut ev = Evaluator::new(&sys, cfg.eig.clone());
    let eig = ev.right(&pert, 10.0).unwrap();
    let out = contract(&mut ev, &pert, Bracket::new(10.0), eig, &cfg).unwrap();
    assert_eq!(out.code, ContractionCode::Converged);
    assert!(out.eps >= 1.0 && out.eps < 1.0 + cfg.tau_eps);
    assert!(out.evaluations <= 3);
}

#[test]
fn contraction_lands_in_band_with_certificate() {
    let cfg = HecConfig::default();
    for seed in 0..20u64 {
        let domain = if seed % 2 == 0 { Domain::Continuous } else { Domain::Discrete };
        let sys = common::random_system(300 + seed, 8, 2, 2, domain, seed % 3 == 0);
        let mut ev = Evaluator::new(&sys, cfg.eig.clone());
        let ub = stabrad::find_destabilizing::<f64>(&mut ev, &cfg).unwrap();
        let out = contract(&mut ev, &ub.pert, Bracket::new(ub.eps), ub.eig.clone(), &cfg).unwrap();
        let m = ev.measure(out.eig.lambda);
        assert!(m >= 0.0, "seed {seed}: certificate lost ({m:e})");
        assert!(out.eps <= ub.eps);
        assert!(out.bracket.eps_lb <= out.eps && out.eps <= out.bracket.eps_ub);
        // Independent re-evaluation at the returned ε.
        assert!((measure(&mut ev, &ub.pert, out.eps) - m).abs() <= 1e-12);
        if out.code == ContractionCode::Converged {
            assert!(m < cfg.tau_eps);
        }
    }
}

#[test]
fn complex_mode_derivative() {
    let mut good = 0;
    for seed in 0..30u64 {
        let sys = common::random_system(700 + seed, 6, 2, 2, Domain::Continuous, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mk = |rng: &mut ChaCha8Rng, r: usize| {
            let (a, b) = (common::randn(rng, r, 1), common::randn(rng, r, 1));
            nalgebra::DMatrix::from_fn(r, 1, |i, _| C64::new(a[(i, 0)], b[(i, 0)]))
        };
        let pert = Perturbation::normalized(mk(&mut rng, 2), mk(&mut rng, 2)).unwrap();
        let eps = 0.3 * sys.cap();
        let mut ev = Evaluator::new(&sys, HecConfig::default().eig);
        let eig = ev.right(&pert, eps).unwrap();
        let eig = ev.ensure_left(&pert, eps, eig).unwrap();
        let d = g_uv_prime(&sys, &pert, eps, &eig).unwrap();
        let h = 1e-6 * eps;
        let mp = ev.right(&pert, eps + h).unwrap().lambda.re;
        let mm = ev.right(&pert, eps - h).unwrap().lambda.re;
        if (d - (mp - mm) / (2.0 * h)).abs() <= 1e-5 * d.abs().max(1e-8) {
            good += 1;
        }
    }
    assert!(good >= 28, "{good}/30");
}
