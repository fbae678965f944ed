//! Point clouds of eigenvalues of `M(εE)` over random unit-norm rank-1 and
//! rank-2 real perturbations. Every point lies in the real spectral value set.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::linalg::{dense_eigenvalues, LinearOperator};
use crate::perturbation::Perturbation;
use crate::system::{perturbed_operator, StateSpaceSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSource {
    Randn,
    Sobol,
    Perturbed,
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleSource::Randn => "randn",
            SampleSource::Sobol => "sobol",
            SampleSource::Perturbed => "perturbed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub re: f64,
    pub im: f64,
    pub source: SampleSource,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleCounts {
    pub randn: usize,
    pub sobol: usize,
    pub perturbed: usize,
}

/// Eigenvalues for every sampled perturbation.
///
/// Samples alternate between rank 1 and rank 2. `base` supplies the
/// perturbations that the `perturbed` samples are drawn around; with an empty
/// `base` none are produced.
pub fn sample_point_cloud(
    sys: &StateSpaceSystem,
    eps: f64,
    counts: SampleCounts,
    seed: u64,
    base: &[Perturbation<f64>],
) -> Result<Vec<SamplePoint>> {
    sys.check_eps(eps)?;
    let (p, m) = (sys.p(), sys.m());
    let mut out = Vec::new();
    let push = |pert: Perturbation<f64>, source, out: &mut Vec<SamplePoint>| -> Result<()> {
        let op = perturbed_operator(sys, &pert, eps)?;
        let dense = op.to_dense().map(|z| z.re);
        for z in dense_eigenvalues(&dense)? {
            out.push(SamplePoint {
                re: z.re,
                im: z.im,
                source,
            });
        }
        Ok(())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..counts.randn {
        let r = 1 + i % 2;
        let u = DMatrix::from_fn(p, r, |_, _| StandardNormal.sample(&mut rng));
        let v = DMatrix::from_fn(m, r, |_, _| StandardNormal.sample(&mut rng));
        if let Some(pert) = Perturbation::normalized(u, v) {
            push(pert, SampleSource::Randn, &mut out)?;
        }
    }

    let normal = Normal::standard();
    let sobol_seed = (seed as u32) ^ ((seed >> 32) as u32);
    for i in 0..counts.sobol {
        let r = 1 + i % 2;
        let coord = |d: usize| {
            let dim = (d % sobol_burley::NUM_DIMENSIONS as usize) as u32;
            let block = (d / sobol_burley::NUM_DIMENSIONS as usize) as u32;
            let x = sobol_burley::sample(i as u32, dim, sobol_seed.wrapping_add(block)) as f64;
            normal.inverse_cdf(x.clamp(1e-7, 1.0 - 1e-7))
        };
        let u = DMatrix::from_fn(p, r, |a, b| coord(b * p + a));
        let v = DMatrix::from_fn(m, r, |a, b| coord(r * p + b * m + a));
        if let Some(pert) = Perturbation::normalized(u, v) {
            push(pert, SampleSource::Sobol, &mut out)?;
        }
    }

    if !base.is_empty() {
        for i in 0..counts.perturbed {
            let b = base[i % base.len()].with_rank(2);
            let sigma = 10f64.powf(rng.random_range(-4.0..0.0));
            let u =
                &b.u + DMatrix::from_fn(p, 2, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
            let v =
                &b.v + DMatrix::from_fn(m, 2, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
            if let Some(pert) = Perturbation::normalized(u, v) {
                push(pert, SampleSource::Perturbed, &mut out)?;
            }
        }
    }
    Ok(out)
}
