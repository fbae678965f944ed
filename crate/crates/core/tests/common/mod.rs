#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stabrad::linalg::dense_eigenvalues;
use stabrad::{Domain, StateSpaceSystem};

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random system with `A` shifted (or scaled, in discrete time) so its
/// spectral abscissa (radius) is `margin` inside the boundary.
pub fn random_system(
    seed: u64,
    n: usize,
    p: usize,
    m: usize,
    domain: Domain,
    with_d: bool,
) -> StateSpaceSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = randn(&mut rng, n, n);
    let eigs = dense_eigenvalues(&a).unwrap();
    match domain {
        Domain::Continuous => {
            let alpha = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            for i in 0..n {
                a[(i, i)] -= alpha + 0.5;
            }
        }
        Domain::Discrete => {
            let rho = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            a /= rho / 0.8;
        }
    }
    let b = randn(&mut rng, n, p);
    let c = randn(&mut rng, m, n);
    let d = if with_d {
        randn(&mut rng, m, p) * 0.1
    } else {
        DMatrix::zeros(m, p)
    };
    StateSpaceSystem::new(a, b, c, d, domain).unwrap()
}
