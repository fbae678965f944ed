//! Contraction phase: with the perturbation frozen, shrink ε until the extremal
//! eigenvalue lands just past the stability boundary.

use crate::config::HecConfig;
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::linalg::{Domain, Eigentriple};
use crate::perturbation::{to_c64, Field, Perturbation};
use crate::system::{smw_factors, StateSpaceSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractionCode {
    MaxitProgress = 0,
    Converged = 1,
    EarlyContraction = 2,
    BracketExhausted = 3,
}

/// Interval `[eps_lb, eps_ub]` known to contain a crossing of `g_UV − τ_ε/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub eps_lb: f64,
    pub eps_ub: f64,
    pub g_lb: Option<f64>,
    pub g_ub: Option<f64>,
}

impl Bracket {
    pub fn new(eps_ub: f64) -> Self {
        Bracket {
            eps_lb: 0.0,
            eps_ub,
            g_lb: None,
            g_ub: None,
        }
    }

    /// No floating-point number lies strictly between the ends.
    pub fn exhausted(&self) -> bool {
        self.eps_lb.next_up() >= self.eps_ub
    }
}

#[derive(Clone, Debug)]
pub struct ContractionOutcome {
    pub eps: f64,
    /// Eigentriple at `eps`; the left vector may be absent.
    pub eig: Eigentriple,
    pub code: ContractionCode,
    pub bracket: Bracket,
    /// Some point with `0 ≤ measure ≤ measure at entry` was found.
    pub progressed: bool,
    pub evaluations: usize,
}

/// `d/dε` of the measure at `eps` for fixed `U, V`: `Re{(y*BU)K²(VᴴCx)}` over
/// `y*x` (continuous) or `|y*x|` (discrete), with `K = (I − εVᴴDU)⁻¹`.
pub fn g_uv_prime<T: Field>(
    sys: &StateSpaceSystem,
    pert: &Perturbation<T>,
    eps: f64,
    eig: &Eigentriple,
) -> Result<f64> {
    let y = eig
        .y
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("derivative needs a left eigenvector".into()))?;
    let smw = smw_factors(&pert.u, &pert.v, sys.d(), eps)?;
    let k = to_c64(&smw.core_inv);
    let (u, v) = (to_c64(&pert.u), to_c64(&pert.v));
    let ybu = u.tr_mul(&sys.bt_mul(y).conjugate());
    let vcx = v.ad_mul(&sys.c_mul(&eig.x));
    let val = ybu.transpose() * (&k * &k) * vcx;
    let yx = y.dotc(&eig.x);
    let den = match sys.domain() {
        Domain::Continuous => yx.re,
        Domain::Discrete => yx.norm(),
    };
    Ok(val[(0, 0)].re / den)
}

struct Point {
    eps: f64,
    eig: Eigentriple,
    g: f64,
}

/// Safeguarded Newton-bisection on `g_UV(ε) − τ_ε/2` inside `bracket`.
///
/// `eig_ub` is the eigentriple at `bracket.eps_ub`, where the measure must be
/// nonnegative. Unless the band `[0, τ_ε)` is hit, the returned point is the
/// current upper end of the bracket.
pub fn contract<T: Field>(
    ev: &mut Evaluator<'_>,
    pert: &Perturbation<T>,
    bracket: Bracket,
    eig_ub: Eigentriple,
    cfg: &HecConfig,
) -> Result<ContractionOutcome> {
    let tau = cfg.tau_eps;
    let target = 0.5 * tau;
    let g_start = ev.measure(eig_ub.lambda);
    let mut br = bracket;
    br.g_ub = Some(g_start);
    if g_start < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "contraction needs a destabilizing start (measure {g_start:e})"
        )));
    }
    if g_start < tau {
        return Ok(ContractionOutcome {
            eps: br.eps_ub,
            eig: eig_ub,
            code: ContractionCode::Converged,
            bracket: br,
            progressed: true,
            evaluations: 0,
        });
    }

    let mut ub_eig = eig_ub.clone();
    let mut cur = Point {
        eps: br.eps_ub,
        eig: eig_ub,
        g: g_start,
    };
    let mut progressed = false;
    let mut evaluations = 0;
    let mut dx = br.eps_ub - br.eps_lb;
    let mut it = 0;

    let code = loop {
        if br.exhausted() {
            break ContractionCode::BracketExhausted;
        }
        if it >= cfg.maxit_contract && progressed {
            break ContractionCode::MaxitProgress;
        }
        it += 1;

        let mut newton = None;
        if cur.eig.y.is_none() {
            if let Ok(e) = ev.ensure_left(pert, cur.eps, cur.eig.clone()) {
                cur.eig = e;
            }
        }
        if cur.eig.y.is_some() {
            if let Ok(d) = g_uv_prime(ev.sys, pert, cur.eps, &cur.eig) {
                let f = cur.g - target;
                if d.is_finite() && d.abs() >= 1e-20 {
                    let cand = cur.eps - f / d;
                    let inside = cand > br.eps_lb && cand < br.eps_ub;
                    let fast = it == 1 || (2.0 * f).abs() <= (dx * d).abs();
                    if inside && fast {
                        newton = Some(cand);
                    }
                }
            }
        }
        let trial = match newton {
            Some(c) => {
                dx = (cur.eps - c).abs();
                c
            }
            None => {
                dx = 0.5 * (br.eps_ub - br.eps_lb);
                br.eps_lb + dx
            }
        };

        let e = ev.right(pert, trial)?;
        evaluations += 1;
        let g = ev.measure(e.lambda);
        if (0.0..tau).contains(&g) {
            br.eps_ub = trial;
            br.g_ub = Some(g);
            return Ok(ContractionOutcome {
                eps: trial,
                eig: e,
                code: ContractionCode::Converged,
                bracket: br,
                progressed: true,
                evaluations,
            });
        }
        let prev_eps = cur.eps;
        if g > target {
            br.eps_ub = trial;
            br.g_ub = Some(g);
            ub_eig = e.clone();
            progressed = true;
            cur = Point {
                eps: trial,
                eig: e,
                g,
            };
            if cfg.early && (prev_eps - trial).abs() < cfg.rel_early * prev_eps {
                break ContractionCode::EarlyContraction;
            }
        } else {
            br.eps_lb = trial;
            br.g_lb = Some(g);
            cur = Point {
                eps: trial,
                eig: e,
                g,
            };
        }
    };
    Ok(ContractionOutcome {
        eps: br.eps_ub,
        eig: ub_eig,
        code,
        bracket: br,
        progressed,
        evaluations,
    })
}
