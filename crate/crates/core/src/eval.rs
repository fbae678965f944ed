//! Eigenvalue evaluations of `M(εE)` with solve accounting.

use crate::error::Result;
use crate::linalg::{
    extremal_eigentriple, left_eigenvector, rp_normalize, Domain, EigConfig, Eigentriple, C64,
};
use crate::perturbation::{Field, Perturbation};
use crate::system::{perturbed_operator, StateSpaceSystem};

/// Number of right and left eigenvector solves performed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub right: usize,
    pub left: usize,
}

impl SolveStats {
    pub fn total(&self) -> usize {
        self.right + self.left
    }
}

pub struct Evaluator<'a> {
    pub sys: &'a StateSpaceSystem,
    pub eig: EigConfig,
    pub stats: SolveStats,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a StateSpaceSystem, eig: EigConfig) -> Self {
        Evaluator {
            sys,
            eig,
            stats: SolveStats::default(),
        }
    }

    pub fn domain(&self) -> Domain {
        self.sys.domain()
    }

    pub fn measure(&self, z: C64) -> f64 {
        self.sys.domain().measure(z)
    }

    /// Extremal eigenvalue and right eigenvector of `M(ε·pert)`.
    pub fn right<T: Field>(&mut self, pert: &Perturbation<T>, eps: f64) -> Result<Eigentriple> {
        let op = perturbed_operator(self.sys, pert, eps)?;
        self.stats.right += 1;
        extremal_eigentriple(&op, self.domain().extremal(), None, false, &self.eig)
    }

    /// Adds the left eigenvector (if missing) and applies the RP normalization.
    pub fn ensure_left<T: Field>(
        &mut self,
        pert: &Perturbation<T>,
        eps: f64,
        e: Eigentriple,
    ) -> Result<Eigentriple> {
        let mut e = e;
        if e.y.is_none() {
            let op = perturbed_operator(self.sys, pert, eps)?;
            self.stats.left += 1;
            e.y = Some(left_eigenvector(
                &op,
                &e,
                self.domain().extremal(),
                &self.eig,
            )?);
        }
        rp_normalize(e, self.domain())
    }
}

/// Measure of `M(ε·pert)`: spectral abscissa, or spectral radius minus one.
pub fn g_uv<T: Field>(
    sys: &StateSpaceSystem,
    pert: &Perturbation<T>,
    eps: f64,
    cfg: &EigConfig,
) -> Result<(f64, Eigentriple)> {
    let mut ev = Evaluator::new(sys, cfg.clone());
    let e = ev.right(pert, eps)?;
    Ok((sys.domain().measure(e.lambda), e))
}
