//! Greedy search for a first destabilizing perturbation: alternate single
//! expansion steps with geometric increases of ε.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::HecConfig;
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::linalg::{leading_eigentriples, rp_normalize, Eigentriple};
use crate::perturbation::{Field, Perturbation};
use crate::svsa::expansion_step;
use crate::system::StateSpaceSystem;

#[derive(Clone, Debug)]
pub struct UpperBound<T: Field> {
    pub eps: f64,
    pub pert: Perturbation<T>,
    pub eig: Eigentriple,
    /// Single update steps taken.
    pub iterations: usize,
    /// Times ε was increased.
    pub increases: usize,
    /// ε reached the cap without destabilizing; `eps` is the last value tried.
    pub cap_exhausted: bool,
}

fn rank_of<T: Field>() -> usize {
    if T::REAL {
        2
    } else {
        1
    }
}

/// Ascent direction at ε = 0 for the eigenvalue of `A` in `eig`, which must
/// carry its left eigenvector. Errors with `ZeroDirection` for an
/// uncontrollable or unobservable mode.
pub fn direction_from<T: Field>(
    sys: &StateSpaceSystem,
    eig: &Eigentriple,
) -> Result<Perturbation<T>> {
    let eig = rp_normalize(eig.clone(), sys.domain())?;
    let y = eig
        .y
        .as_ref()
        .expect("rp_normalize requires the left vector");
    let u = T::split(&sys.bt_mul(y));
    let v = T::split(&sys.c_mul(&eig.x));
    let nrm = crate::perturbation::fro_norm_factored(&u, &v);
    if nrm <= 1e-14 * sys.b_norm() * sys.c_norm() {
        return Err(Error::ZeroDirection);
    }
    Perturbation::normalized(u, v).ok_or(Error::ZeroDirection)
}

/// Ascent direction at ε = 0 built from the extremal eigentriple of `A`.
///
/// Returns the unit-norm perturbation and the (normalized) eigentriple of `A`.
pub fn initial_perturbation<T: Field>(
    ev: &mut Evaluator<'_>,
) -> Result<(Perturbation<T>, Eigentriple)> {
    let sys = ev.sys;
    let zero = Perturbation::<T> {
        u: DMatrix::zeros(sys.p(), rank_of::<T>()),
        v: DMatrix::zeros(sys.m(), rank_of::<T>()),
    };
    let eig = ev.right(&zero, 0.0)?;
    let eig = ev.ensure_left(&zero, 0.0, eig)?;
    let pert = direction_from(sys, &eig)?;
    Ok((pert, eig))
}

/// Starting perturbations from the `cfg.starts` most extremal distinct
/// eigenvalues of `A`, each paired with that eigenvalue's measure. Modes
/// without an ascent direction get a seeded random perturbation.
pub fn starting_points<T: Field>(
    ev: &mut Evaluator<'_>,
    cfg: &HecConfig,
) -> Result<Vec<(Perturbation<T>, f64)>> {
    let sys = ev.sys;
    let op = sys.unperturbed();
    let eigs = leading_eigentriples(&op, ev.domain().extremal(), cfg.starts, &ev.eig)?;
    ev.stats.right += eigs.len();
    ev.stats.left += eigs.len();
    let first = eigs
        .first()
        .ok_or_else(|| Error::NonConvergence("no eigenvalue of A".into()))?;
    if ev.measure(first.lambda) >= 0.0 {
        return Err(Error::UnstableA(first.lambda));
    }
    let mut out = Vec::with_capacity(eigs.len());
    for (j, e) in eigs.iter().enumerate() {
        let pert = match direction_from::<T>(sys, e) {
            Ok(p) => p,
            Err(Error::ZeroDirection | Error::IllConditionedEigenvalue { .. }) => {
                random_perturbation::<T>(
                    sys.p(),
                    sys.m(),
                    rank_of::<T>(),
                    cfg.seed.wrapping_add(j as u64),
                )
            }
            Err(err) => return Err(err),
        };
        out.push((pert, ev.measure(e.lambda)));
    }
    if T::REAL && sys.p() == 1 && sys.m() == 1 {
        // Real scalar perturbations are ±ε: two components the expansion cannot cross.
        let flipped: Vec<_> = out.iter().map(|(p, a)| (p.negated(), *a)).collect();
        out.extend(flipped);
    }
    Ok(out)
}

/// Seeded Gaussian factors scaled to unit Frobenius norm.
pub fn random_perturbation<T: Field>(p: usize, m: usize, r: usize, seed: u64) -> Perturbation<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows| {
        DMatrix::from_fn(rows, r, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            if T::REAL {
                T::from_real(re)
            } else {
                let im: f64 = StandardNormal.sample(&mut rng);
                T::from_c64(crate::linalg::C64::new(re, im))
            }
        })
    };
    let u = draw(p);
    let v = draw(m);
    Perturbation::normalized(u, v).expect("Gaussian factors are nonzero")
}

/// Like [`find_destabilizing`], but reports cap exhaustion in the result.
pub fn upper_bound_search<T: Field>(
    ev: &mut Evaluator<'_>,
    cfg: &HecConfig,
) -> Result<UpperBound<T>> {
    let sys = ev.sys;
    let (pert, eig_a) = match initial_perturbation::<T>(ev) {
        Ok(x) => x,
        Err(Error::ZeroDirection) => {
            let zero = random_perturbation::<T>(sys.p(), sys.m(), rank_of::<T>(), cfg.seed);
            let e = ev.right(&zero, 0.0)?;
            (zero, e)
        }
        Err(e) => return Err(e),
    };
    let alpha = ev.measure(eig_a.lambda);
    if alpha >= 0.0 {
        return Err(Error::UnstableA(eig_a.lambda));
    }
    upper_bound_from(ev, pert, alpha, true, cfg)
}

/// Greedy search starting from `pert`, with ε₀ scaled by the measure `alpha < 0`
/// of the eigenvalue `pert` was built from.
///
/// With `greedy = false` the direction is frozen and only ε grows, which finds
/// the first destabilizing point along the ray `ε·pert`.
pub fn upper_bound_from<T: Field>(
    ev: &mut Evaluator<'_>,
    pert: Perturbation<T>,
    alpha: f64,
    greedy: bool,
    cfg: &HecConfig,
) -> Result<UpperBound<T>> {
    let sys = ev.sys;
    let gain = sys.b_norm() * sys.c_norm();
    if gain == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let cap = sys.cap();
    let cap_eff = cap * (1.0 - 1e-12);
    let eps0 = (alpha.abs() / gain).min(0.1 * cap);
    let mut eps = eps0;
    let mut pert = pert.with_rank(rank_of::<T>());
    let mut eig = ev.right(&pert, eps)?;
    let mut iterations = 0;
    let mut increases = 0;

    loop {
        if ev.measure(eig.lambda) > 0.0 {
            break;
        }
        let with_left = if greedy {
            ev.ensure_left(&pert, eps, eig.clone()).ok()
        } else {
            None
        };
        if let Some(e) = with_left {
            match expansion_step(ev, eps, &pert, &e, cfg) {
                Ok(step) => {
                    pert = step.pert;
                    eig = step.eig;
                }
                Err(Error::StaticPoint(_) | Error::DerivativeZero | Error::LineSearchFailed(_)) => {
                    eig = e
                }
                Err(err) => return Err(err),
            }
            iterations += 1;
        }
        if ev.measure(eig.lambda) > 0.0 {
            break;
        }
        if (greedy && increases >= cfg.ub_maxit) || eps > 1e16 * eps0 {
            return Err(Error::NonConvergence(format!(
                "no destabilizing perturbation up to eps = {eps:e}"
            )));
        }
        let growth = if greedy { cfg.ub_growth } else { cfg.ray_growth };
        let next = if cap.is_finite() {
            (growth * eps).min(0.5 * (eps + cap_eff))
        } else {
            growth * eps
        };
        if !(next > eps) {
            return Ok(UpperBound {
                eps,
                pert,
                eig,
                iterations,
                increases,
                cap_exhausted: true,
            });
        }
        eps = next;
        increases += 1;
        eig = ev.right(&pert, eps)?;
    }
    Ok(UpperBound {
        eps,
        pert,
        eig,
        iterations,
        increases,
        cap_exhausted: false,
    })
}

/// First `(ε, U, V)` found with a destabilized extremal eigenvalue.
pub fn find_destabilizing<T: Field>(
    ev: &mut Evaluator<'_>,
    cfg: &HecConfig,
) -> Result<UpperBound<T>> {
    let ub = upper_bound_search(ev, cfg)?;
    if ub.cap_exhausted {
        return Err(Error::CapExhausted { cap: ev.sys.cap() });
    }
    Ok(ub)
}
