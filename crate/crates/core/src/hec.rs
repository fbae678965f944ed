//! Hybrid expansion-contraction outer loop.

use crate::config::HecConfig;
use crate::contraction::{contract, Bracket, ContractionCode};
use crate::error::{Error, Result};
use crate::eval::{Evaluator, SolveStats};
use crate::linalg::{Domain, Eigentriple, C64};
use crate::perturbation::{Field, Perturbation};
use crate::svsa::svsa_expand;
use crate::system::StateSpaceSystem;
use crate::upperbound::{starting_points, upper_bound_from, UpperBound};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    ConvergedToTolerance,
    Stagnated,
    MaxitOuter,
    /// No destabilizing perturbation below `‖D‖₂⁻¹`; the radius is the cap.
    CapActive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Contraction,
    Expansion,
}

#[derive(Clone, Debug)]
pub struct PhaseRecord {
    pub phase: Phase,
    /// Return code of the phase, or `None` if it failed with an error.
    pub code: Option<u8>,
    pub eps: f64,
    /// Measure of the eigenvalue the phase ended on.
    pub measure: f64,
    pub static_point: bool,
    /// Expansion only: measure of each accepted iterate.
    pub measures: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct HecResult<T: Field> {
    pub eps_final: f64,
    pub pert_final: Perturbation<T>,
    pub lambda_final: C64,
    pub eig_final: Eigentriple,
    pub status: Status,
    /// ε at the start and after every strict decrease.
    pub eps_history: Vec<f64>,
    pub stats: SolveStats,
    pub phase_log: Vec<PhaseRecord>,
    pub outer_iters: usize,
    pub cap_active: bool,
}

/// `0 ≤ measure(λ) < 2τ_ε`.
pub fn convergence_check(lambda: C64, tau_eps: f64, domain: Domain) -> bool {
    let m = domain.measure(lambda);
    (0.0..2.0 * tau_eps).contains(&m)
}

/// Runs the outer loop from a destabilizing `(eps0, pert0)` whose extremal eigentriple is `eig0`.
pub fn hec_solve<T: Field>(
    sys: &StateSpaceSystem,
    eps0: f64,
    pert0: Perturbation<T>,
    eig0: Eigentriple,
    cfg: &HecConfig,
) -> Result<HecResult<T>> {
    let mut ev = Evaluator::new(sys, cfg.eig.clone());
    hec_run(&mut ev, eps0, pert0, eig0, cfg)
}

/// [`hec_solve`] with a caller-owned evaluator, so solve counts accumulate.
pub fn hec_run<T: Field>(
    ev: &mut Evaluator<'_>,
    eps0: f64,
    pert0: Perturbation<T>,
    eig0: Eigentriple,
    cfg: &HecConfig,
) -> Result<HecResult<T>> {
    cfg.validate()?;
    ev.sys.check_eps(eps0)?;
    let m0 = ev.measure(eig0.lambda);
    if !(m0 >= 0.0) {
        return Err(Error::InitialNotDestabilizing(m0));
    }
    let domain = ev.domain();
    let tau = cfg.tau_eps;
    let mut eps = eps0;
    let mut pert = pert0.with_rank(if T::REAL { 2 } else { 1 });
    let mut eig = eig0;
    let mut bracket = Bracket::new(eps0);
    let mut expand_converged = false;
    let mut eps_history = vec![eps0];
    let mut log = Vec::new();
    let mut status = Status::MaxitOuter;
    let mut outer_iters = 0;

    for _ in 0..cfg.maxit_outer {
        outer_iters += 1;
        let con = match contract(ev, &pert, bracket, eig.clone(), cfg) {
            Ok(c) => c,
            Err(e) => {
                log.push(failed(Phase::Contraction, eps, &e));
                status = Status::Stagnated;
                break;
            }
        };
        log.push(PhaseRecord {
            phase: Phase::Contraction,
            code: Some(con.code as u8),
            eps: con.eps,
            measure: ev.measure(con.eig.lambda),
            static_point: false,
            measures: Vec::new(),
            error: None,
        });
        eps = con.eps;
        eig = con.eig;
        bracket = con.bracket;
        if eps < *eps_history.last().expect("history starts non-empty") {
            eps_history.push(eps);
        }
        if con.code == ContractionCode::BracketExhausted && expand_converged {
            status = if convergence_check(eig.lambda, tau, domain) {
                Status::ConvergedToTolerance
            } else {
                Status::Stagnated
            };
            break;
        }

        let m_c = ev.measure(eig.lambda);
        let exp = match svsa_expand(ev, eps, pert.clone(), eig.clone(), cfg) {
            Ok(x) => x,
            Err(e) => {
                log.push(failed(Phase::Expansion, eps, &e));
                status = Status::Stagnated;
                break;
            }
        };
        let m_next = ev.measure(exp.eig.lambda);
        log.push(PhaseRecord {
            phase: Phase::Expansion,
            code: Some(exp.code as u8),
            eps,
            measure: m_next,
            static_point: exp.static_point,
            measures: exp.measures.clone(),
            error: None,
        });
        expand_converged = exp.code.converged();
        pert = exp.pert;
        eig = exp.eig;
        if expand_converged && convergence_check(eig.lambda, tau, domain) {
            status = Status::ConvergedToTolerance;
            break;
        } else if m_next - m_c > 0.0 {
            bracket = Bracket::new(eps);
        } else if con.code == ContractionCode::BracketExhausted {
            status = Status::Stagnated;
            break;
        }
    }

    let cap_active = ev.sys.cap().is_finite() && eps >= ev.sys.cap() * (1.0 - 1e-8);
    Ok(HecResult {
        eps_final: eps,
        pert_final: pert,
        lambda_final: eig.lambda,
        eig_final: eig,
        status,
        eps_history,
        stats: ev.stats,
        phase_log: log,
        outer_iters,
        cap_active,
    })
}

fn failed(phase: Phase, eps: f64, e: &Error) -> PhaseRecord {
    PhaseRecord {
        phase,
        code: None,
        eps,
        measure: f64::NAN,
        static_point: false,
        measures: Vec::new(),
        error: Some(e.to_string()),
    }
}

/// Full pipeline: search for a destabilizing perturbation, then run the outer loop.
///
/// `T = f64` approximates the real Frobenius-norm radius, `T = C64` the complex one.
/// One run is made per starting eigenvalue (see [`HecConfig::starts`]) and,
/// with [`HecConfig::ray_starts`], a second along its frozen direction. The
/// smallest certified ε is returned and the solve counts cover all runs.
pub fn solve<T: Field>(sys: &StateSpaceSystem, cfg: &HecConfig) -> Result<HecResult<T>> {
    cfg.validate()?;
    let mut ev = Evaluator::new(sys, cfg.eig.clone());
    let starts = starting_points::<T>(&mut ev, cfg)?;
    let mut best: Option<HecResult<T>> = None;
    let mut first_err = None;
    let modes: &[bool] = if cfg.ray_starts {
        &[true, false]
    } else {
        &[true]
    };
    for (pert, alpha) in starts {
        for &greedy in modes {
            let run = match upper_bound_from(&mut ev, pert.clone(), alpha, greedy, cfg) {
                Ok(ub) if ub.cap_exhausted => Ok(cap_result(sys, ub, ev.stats)),
                Ok(ub) => hec_run(&mut ev, ub.eps, ub.pert, ub.eig, cfg),
                Err(e) => Err(e),
            };
            match run {
                Ok(r) => {
                    if best.as_ref().is_none_or(|b| better(&r, b)) {
                        best = Some(r);
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
    }
    if let Some(b) = best.take() {
        best = Some(escape_real_axis(&mut ev, b, cfg));
    }
    match best {
        Some(mut r) => {
            r.stats = ev.stats;
            Ok(r)
        }
        None => Err(first_err.expect("at least one start was tried")),
    }
}

/// Complex mode only. Conjugate symmetry keeps real data on the real axis,
/// where the iteration can settle on a stationary point that is not a local
/// maximum of `‖G‖` over frequency. Rotating `E` by `e^{iθ}` moves `λ` along
/// the boundary to first order; each rotation reruns the outer loop from
/// slightly above the current ε and is kept if it does better.
fn escape_real_axis<T: Field>(
    ev: &mut Evaluator<'_>,
    best: HecResult<T>,
    cfg: &HecConfig,
) -> HecResult<T> {
    let lam = best.lambda_final;
    let near_axis = lam.im.abs() <= 1e-6 * lam.norm().max(1.0);
    if T::REAL || best.status != Status::ConvergedToTolerance || !near_axis {
        return best;
    }
    let cap = ev.sys.cap();
    let eps = (best.eps_final * 1.001).min(0.5 * (best.eps_final + cap));
    let mut best = best;
    for theta in [0.05, 0.3, 1.0] {
        let rot = T::from_c64(C64::from_polar(1.0, theta));
        let pert = Perturbation {
            u: &best.pert_final.u * rot,
            v: best.pert_final.v.clone(),
        };
        let Ok(eig) = ev.right(&pert, eps) else { continue };
        if !(ev.measure(eig.lambda) >= 0.0) {
            continue;
        }
        if let Ok(r) = hec_run(ev, eps, pert, eig, cfg) {
            if r.status == Status::ConvergedToTolerance && r.eps_final < best.eps_final {
                best = r;
            }
        }
    }
    best
}

fn better<T: Field>(a: &HecResult<T>, b: &HecResult<T>) -> bool {
    let rank = |s: Status| match s {
        Status::ConvergedToTolerance => 0,
        Status::Stagnated | Status::MaxitOuter => 1,
        Status::CapActive => 2,
    };
    a.eps_final < b.eps_final || (a.eps_final == b.eps_final && rank(a.status) < rank(b.status))
}

fn cap_result<T: Field>(
    sys: &StateSpaceSystem,
    ub: UpperBound<T>,
    stats: SolveStats,
) -> HecResult<T> {
    HecResult {
        eps_final: sys.cap(),
        lambda_final: ub.eig.lambda,
        pert_final: ub.pert,
        eig_final: ub.eig,
        status: Status::CapActive,
        eps_history: vec![ub.eps],
        stats,
        phase_log: Vec::new(),
        outer_iters: 0,
        cap_active: true,
    }
}
