//! The expansion iteration at fixed ε: push the extremal eigenvalue of
//! `M(εUVᴴ)` right (or outward) by repeated low-rank updates, each guarded by a
//! monotonicity line search.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::accel;
use crate::config::HecConfig;
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::linalg::{Domain, EigConfig, Eigentriple, TiePolicy, C64};
use crate::perturbation::{fro_norm_factored, inner_factored, to_c64, Field, Perturbation};
use crate::system::{smw_factors, StateSpaceSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionCode {
    Maxit = 0,
    RelStepConverged = 1,
    EarlyTermination = 2,
    LineSearchFailed = 3,
}

impl ExpansionCode {
    /// Codes 1 and 3: no further rightward progress is possible.
    pub fn converged(self) -> bool {
        matches!(
            self,
            ExpansionCode::RelStepConverged | ExpansionCode::LineSearchFailed
        )
    }
}

/// Unnormalized update `Û = (I − εUVᴴD)⁻ᴴBᵀY`, `V̂ = (I − εDUVᴴ)⁻¹CX` together with
/// the complex vectors `u`, `v` it was split from.
#[derive(Clone, Debug)]
pub struct Direction<T: Field> {
    pub u_hat: DMatrix<T>,
    pub v_hat: DMatrix<T>,
    pub u: DVector<C64>,
    pub v: DVector<C64>,
}

impl<T: Field> Direction<T> {
    /// `‖Re(uv*)‖_F` in real mode, `‖uv*‖_F` in complex mode.
    pub fn norm(&self) -> f64 {
        fro_norm_factored(&self.u_hat, &self.v_hat)
    }
}

fn static_tol(sys: &StateSpaceSystem) -> f64 {
    1e-14 * sys.b_norm() * sys.c_norm()
}

pub fn uv_direction<T: Field>(
    sys: &StateSpaceSystem,
    eps: f64,
    pert: &Perturbation<T>,
    eig: &Eigentriple,
) -> Result<Direction<T>> {
    let y = eig
        .y
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("update needs a left eigenvector".into()))?;
    let smw = smw_factors(&pert.u, &pert.v, sys.d(), eps)?;
    let u_hat = smw.input_inverse_adjoint(&T::split(&sys.bt_mul(y)));
    let v_hat = smw.output_inverse(&T::split(&sys.c_mul(&eig.x)));
    let u = T::merge(&u_hat);
    let v = T::merge(&v_hat);
    Ok(Direction { u_hat, v_hat, u, v })
}

/// Full update step `E_{k+1} = Re(uv*)/‖Re(uv*)‖_F` in factored form.
pub fn uv_update<T: Field>(
    sys: &StateSpaceSystem,
    eps: f64,
    pert: &Perturbation<T>,
    eig: &Eigentriple,
) -> Result<Perturbation<T>> {
    let dir = uv_direction(sys, eps, pert, eig)?;
    let nrm = dir.norm();
    if nrm <= static_tol(sys) {
        return Err(Error::StaticPoint(nrm));
    }
    Perturbation::normalized(dir.u_hat, dir.v_hat).ok_or(Error::StaticPoint(nrm))
}

fn eig_denominator(eig: &Eigentriple, domain: Domain) -> Result<f64> {
    let yx = eig
        .yx()
        .ok_or_else(|| Error::InvalidArgument("derivative needs a left eigenvector".into()))?;
    Ok(match domain {
        Domain::Continuous => yx.re,
        Domain::Discrete => yx.norm(),
    })
}

/// Derivative at `t = 0` of the measure along the renormalized factor-wise path
/// from `old` to `new`, using the direction `dir` computed at `old`.
pub fn path_derivative<T: Field>(
    eps: f64,
    old: &Perturbation<T>,
    new: &Perturbation<T>,
    dir: &Direction<T>,
    eig: &Eigentriple,
    domain: Domain,
) -> Result<f64> {
    let (u0, v0, u1, v1) = (
        to_c64(&old.u),
        to_c64(&old.v),
        to_c64(&new.u),
        to_c64(&new.v),
    );
    let (uu0, uu1) = (u0.ad_mul(&dir.u), u1.ad_mul(&dir.u));
    let (vv0, vv1) = (v0.ad_mul(&dir.v), v1.ad_mul(&dir.v));
    let cross = uu1.dotc(&vv0) + uu0.dotc(&vv1);
    let e0 = uu0.dotc(&vv0);
    let inner = inner_factored(&old.u, &old.v, &new.u, &old.v)
        + inner_factored(&old.u, &old.v, &old.u, &new.v);
    let ued = cross - e0 * inner;
    Ok(eps * ued.re / eig_denominator(eig, domain)?)
}

/// Orients `new` so that the path from `old` starts uphill; returns it with the slope.
pub fn orient_signs<T: Field>(
    sys: &StateSpaceSystem,
    eps: f64,
    old: &Perturbation<T>,
    new: &Perturbation<T>,
    eig: &Eigentriple,
) -> Result<(Perturbation<T>, f64)> {
    let dir = uv_direction(sys, eps, old, eig)?;
    orient_with(sys, eps, old, new, &dir, eig)
}

fn orient_with<T: Field>(
    sys: &StateSpaceSystem,
    eps: f64,
    old: &Perturbation<T>,
    new: &Perturbation<T>,
    dir: &Direction<T>,
    eig: &Eigentriple,
) -> Result<(Perturbation<T>, f64)> {
    let d0 = path_derivative(eps, old, new, dir, eig, sys.domain())?;
    let scale = eps * dir.norm()
        / eig_denominator(eig, sys.domain())?
            .abs()
            .max(f64::MIN_POSITIVE);
    if !(d0.abs() > 1e-14 * scale) {
        return Err(Error::DerivativeZero);
    }
    Ok(if d0 > 0.0 {
        (new.clone(), d0)
    } else {
        (new.flipped(), -d0)
    })
}

/// Backtracking along the renormalized path from `old` toward `new` after the
/// full step failed to increase the measure. An interpolation-model candidate is
/// tried first when `accel` is set.
pub fn line_search<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    old: &Perturbation<T>,
    new: &Perturbation<T>,
    eig_old: &Eigentriple,
    measure_new: f64,
    cfg: &HecConfig,
) -> Result<(Perturbation<T>, Eigentriple, f64)> {
    let dir = uv_direction(ev.sys, eps, old, eig_old)?;
    line_search_with(ev, eps, old, new, &dir, eig_old, measure_new, cfg)
}

#[allow(clippy::too_many_arguments)]
fn line_search_with<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    old: &Perturbation<T>,
    new: &Perturbation<T>,
    dir: &Direction<T>,
    eig_old: &Eigentriple,
    measure_new: f64,
    cfg: &HecConfig,
) -> Result<(Perturbation<T>, Eigentriple, f64)> {
    let (target, d0) = orient_with(ev.sys, eps, old, new, dir, eig_old)?;
    let m0 = ev.measure(eig_old.lambda);
    let mut trials = Vec::with_capacity(cfg.max_ls + 1);
    if cfg.accel {
        if let Some(t) = quadratic_argmax(m0, d0, measure_new).filter(|&t| t < 0.5) {
            trials.push(t);
        }
    }
    let mut t = 0.5;
    for _ in 0..cfg.max_ls {
        trials.push(t);
        t *= 0.5;
    }
    for t in trials {
        let Some(cand) = old.interpolate(&target, t) else {
            continue;
        };
        let e = ev.right(&cand, eps)?;
        if ev.measure(e.lambda) > m0 {
            return Ok((cand, e, t));
        }
    }
    Err(Error::LineSearchFailed(cfg.max_ls))
}

/// Maximizer in `(0, 1)` of `q(t) = m0 + d0·t + (m1 − m0 − d0)·t²`, if any.
pub fn quadratic_argmax(m0: f64, d0: f64, m1: f64) -> Option<f64> {
    let c = m1 - m0 - d0;
    if !(c < 0.0 && d0 > 0.0) {
        return None;
    }
    let t = -d0 / (2.0 * c);
    (t > 0.0 && t < 1.0).then_some(t)
}

/// One accepted iterate.
#[derive(Clone, Debug)]
pub struct Step<T: Field> {
    pub pert: Perturbation<T>,
    pub eig: Eigentriple,
    pub t: f64,
}

/// Full update, then either the interpolation check or the line search.
/// `eig` must carry an RP-normalized left vector.
pub fn expansion_step<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    pert: &Perturbation<T>,
    eig: &Eigentriple,
    cfg: &HecConfig,
) -> Result<Step<T>> {
    let dir = uv_direction(ev.sys, eps, pert, eig)?;
    let nrm = dir.norm();
    if nrm <= static_tol(ev.sys) {
        return Err(Error::StaticPoint(nrm));
    }
    let full = Perturbation::normalized(dir.u_hat.clone(), dir.v_hat.clone())
        .ok_or(Error::StaticPoint(nrm))?;
    let eig_full = ev.right(&full, eps)?;
    let m0 = ev.measure(eig.lambda);
    let m1 = ev.measure(eig_full.lambda);
    if m1 <= m0 {
        let (p, e, t) = line_search_with(ev, eps, pert, &full, &dir, eig, m1, cfg)?;
        return Ok(Step { pert: p, eig: e, t });
    }
    if cfg.accel {
        if let Ok((target, d0)) = orient_with(ev.sys, eps, pert, &full, &dir, eig) {
            if let Some(t) = quadratic_argmax(m0, d0, m1) {
                let predicted = d0 * t + (m1 - m0 - d0) * t * t;
                if predicted >= 1.5 * (m1 - m0) {
                    if let Some(cand) = pert.interpolate(&target, t) {
                        let e = ev.right(&cand, eps)?;
                        if ev.measure(e.lambda) > m1 {
                            return Ok(Step {
                                pert: cand,
                                eig: e,
                                t,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Step {
        pert: full,
        eig: eig_full,
        t: 1.0,
    })
}

#[derive(Clone, Debug)]
pub struct ExpansionOutcome<T: Field> {
    pub pert: Perturbation<T>,
    /// Extremal eigentriple of the final iterate; the left vector may be absent.
    pub eig: Eigentriple,
    pub code: ExpansionCode,
    /// The phase stopped because `Re(uv*)` vanished.
    pub static_point: bool,
    pub steps: usize,
    /// Measure of every accepted iterate, starting with the initial one.
    pub measures: Vec<f64>,
    /// Accepted perturbations (only when recording was requested).
    pub iterates: Vec<Perturbation<T>>,
    pub extrapolations: usize,
}

fn rank_of<T: Field>() -> usize {
    if T::REAL {
        2
    } else {
        1
    }
}

/// Relative change in ℂ, measured in the upper half-plane for real problems.
fn rel_change(a: C64, b: C64, real: bool) -> Option<f64> {
    if a == C64::new(0.0, 0.0) || b == C64::new(0.0, 0.0) {
        return None;
    }
    let canon = |z: C64| if real { C64::new(z.re, z.im.abs()) } else { z };
    Some((canon(b) - canon(a)).norm() / canon(a).norm())
}

/// Expansion phase at fixed `eps`.
pub fn svsa_expand<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    pert0: Perturbation<T>,
    eig0: Eigentriple,
    cfg: &HecConfig,
) -> Result<ExpansionOutcome<T>> {
    expand_recording(ev, eps, pert0, eig0, cfg, false)
}

/// Complex rank-1 expansion; the same iteration over `C64` factors.
pub fn complex_expand(
    ev: &mut Evaluator<'_>,
    eps: f64,
    pert0: Perturbation<C64>,
    eig0: Eigentriple,
    cfg: &HecConfig,
) -> Result<ExpansionOutcome<C64>> {
    expand_recording(ev, eps, pert0, eig0, cfg, false)
}

/// [`svsa_expand`], optionally keeping every accepted perturbation.
pub fn expand_recording<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    pert0: Perturbation<T>,
    eig0: Eigentriple,
    cfg: &HecConfig,
    record: bool,
) -> Result<ExpansionOutcome<T>> {
    ev.sys.check_eps(eps)?;
    if pert0.rank() > rank_of::<T>() {
        return Err(Error::InvalidArgument(format!(
            "perturbation rank {} too large",
            pert0.rank()
        )));
    }
    let real = T::REAL;
    let mut pert = pert0.with_rank(rank_of::<T>());
    let mut eig = eig0;
    let mut out_measures = vec![ev.measure(eig.lambda)];
    let mut iterates = Vec::new();
    if record {
        iterates.push(pert.clone());
    }
    let mut window: VecDeque<Perturbation<T>> = VecDeque::with_capacity(cfg.extrap_window + 1);
    window.push_back(pert.clone());
    let mut first_step = None;
    let mut code = ExpansionCode::Maxit;
    let mut static_point = false;
    let mut steps = 0;
    let mut extrapolations = 0;

    while steps < cfg.maxit_expand {
        eig = ev.ensure_left(&pert, eps, eig)?;
        let step = match expansion_step(ev, eps, &pert, &eig, cfg) {
            Ok(s) => s,
            Err(Error::StaticPoint(_)) => {
                static_point = true;
                code = ExpansionCode::RelStepConverged;
                break;
            }
            Err(Error::DerivativeZero) => {
                code = ExpansionCode::RelStepConverged;
                break;
            }
            Err(Error::LineSearchFailed(_)) => {
                code = ExpansionCode::LineSearchFailed;
                break;
            }
            Err(e) => return Err(e),
        };
        let (lam_old, m_old) = (eig.lambda, ev.measure(eig.lambda));
        pert = step.pert;
        eig = step.eig;
        steps += 1;
        out_measures.push(ev.measure(eig.lambda));
        if record {
            iterates.push(pert.clone());
        }
        window.push_back(pert.clone());
        if window.len() > cfg.extrap_window {
            window.pop_front();
        }

        if cfg.accel && steps % cfg.extrap_period == 0 && window.len() == cfg.extrap_window {
            let hist: Vec<Perturbation<T>> = window.iter().cloned().collect();
            if let Some(cand) = accel::extrapolate_rank2(&hist) {
                if let Some((p, e)) = accel::try_accept_extrapolation(ev, eps, &cand, &eig)? {
                    pert = p;
                    eig = e;
                    extrapolations += 1;
                    out_measures.push(ev.measure(eig.lambda));
                    if record {
                        iterates.push(pert.clone());
                    }
                    window.clear();
                    window.push_back(pert.clone());
                }
            }
        }

        if rel_change(lam_old, eig.lambda, real).is_some_and(|r| r < cfg.tau_uv) {
            code = ExpansionCode::RelStepConverged;
            break;
        }
        let len = ev.measure(eig.lambda) - m_old;
        let first = *first_step.get_or_insert(len);
        if cfg.early && steps > 1 && len < cfg.rel_early * first {
            code = ExpansionCode::EarlyTermination;
            break;
        }
    }
    Ok(ExpansionOutcome {
        pert,
        eig,
        code,
        static_point,
        steps,
        measures: out_measures,
        iterates,
        extrapolations,
    })
}

fn ode_eig(
    sys: &StateSpaceSystem,
    eps: f64,
    e: &DMatrix<f64>,
    cfg: &EigConfig,
) -> Result<(Perturbation<f64>, Eigentriple)> {
    if e.shape() != (sys.p(), sys.m()) {
        return Err(Error::DimensionMismatch(format!(
            "E must be {}x{}",
            sys.p(),
            sys.m()
        )));
    }
    let mut cfg = cfg.clone();
    cfg.tie = TiePolicy::Strict;
    let pert = Perturbation {
        u: e.clone(),
        v: DMatrix::identity(sys.m(), sys.m()),
    };
    let mut ev = Evaluator::new(sys, cfg);
    let eig = ev.right(&pert, eps)?;
    let eig = ev.ensure_left(&pert, eps, eig)?;
    Ok((pert, eig))
}

/// Right-hand side `Ė = Re(uv*) − ⟨E, Re(uv*)⟩E` of the gradient flow on
/// unit-Frobenius real p×m matrices, with the eigentriple it was evaluated at.
pub fn ode_rhs(
    sys: &StateSpaceSystem,
    eps: f64,
    e: &DMatrix<f64>,
    cfg: &EigConfig,
) -> Result<(DMatrix<f64>, Eigentriple)> {
    let (pert, eig) = ode_eig(sys, eps, e, cfg)?;
    let dir = uv_direction(sys, eps, &pert, &eig)?;
    let r = re_outer(&dir.u, &dir.v);
    let proj = (e.component_mul(&r)).sum();
    Ok((r - e * proj, eig))
}

/// `Re(uv*)` as a dense real matrix.
pub fn re_outer(u: &DVector<C64>, v: &DVector<C64>) -> DMatrix<f64> {
    DMatrix::from_fn(u.len(), v.len(), |i, j| (u[i] * v[j].conj()).re)
}

/// Explicit Euler step on the flow followed by renormalization.
pub fn euler_step(
    sys: &StateSpaceSystem,
    eps: f64,
    e: &DMatrix<f64>,
    h: f64,
    cfg: &EigConfig,
) -> Result<(DMatrix<f64>, Eigentriple)> {
    let (rhs, eig) = ode_rhs(sys, eps, e, cfg)?;
    let next = e + rhs * h;
    let nrm = next.norm();
    Ok((next / nrm, eig))
}

/// `‖E − Re(uv*)/‖Re(uv*)‖_F‖_F`: distance of `pert` from its own full update.
/// `eig` must carry an RP-normalized left vector.
pub fn fixed_point_residual<T: Field>(
    sys: &StateSpaceSystem,
    eps: f64,
    pert: &Perturbation<T>,
    eig: &Eigentriple,
) -> Result<f64> {
    let full = uv_update(sys, eps, pert, eig)?;
    Ok(difference_norm(pert, &full))
}

fn difference_norm<T: Field>(a: &Perturbation<T>, b: &Perturbation<T>) -> f64 {
    let (ra, rb) = (a.rank(), b.rank());
    let mut u = DMatrix::zeros(a.p(), ra + rb);
    let mut v = DMatrix::zeros(a.m(), ra + rb);
    u.columns_mut(0, ra).copy_from(&a.u);
    u.columns_mut(ra, rb).copy_from(&(-&b.u));
    v.columns_mut(0, ra).copy_from(&a.v);
    v.columns_mut(ra, rb).copy_from(&b.v);
    fro_norm_factored(&u, &v)
}

/// Takes plain full update steps from an expansion limit for as long as the
/// fixed-point residual keeps shrinking and the measure does not drop beyond
/// rounding. Returns the best point and its residual.
pub fn polish<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    pert: Perturbation<T>,
    eig: Eigentriple,
    maxit: usize,
) -> Result<(Perturbation<T>, Eigentriple, f64)> {
    let sys = ev.sys;
    let mut eig = ev.ensure_left(&pert, eps, eig)?;
    let mut pert = pert;
    let mut res = fixed_point_residual(sys, eps, &pert, &eig)?;
    for _ in 0..maxit {
        if res == 0.0 {
            break;
        }
        let next = uv_update(sys, eps, &pert, &eig)?;
        let e = ev.right(&next, eps)?;
        let (m0, m1) = (ev.measure(eig.lambda), ev.measure(e.lambda));
        if m1 < m0 - 1e-13 * m0.abs().max(1.0) {
            break;
        }
        let e = ev.ensure_left(&next, eps, e)?;
        let r = fixed_point_residual(sys, eps, &next, &e)?;
        if !(r < res) {
            break;
        }
        pert = next;
        eig = e;
        res = r;
    }
    Ok((pert, eig, res))
}
