//! Extremal eigentriples of implicitly defined operators.
//!
//! Small operators are assembled and handled by a dense Schur decomposition;
//! large ones go through an implicitly restarted Arnoldi iteration. Either way
//! eigenvectors are refined by inverse iteration and the left eigenvector is
//! only computed when asked for.

mod arnoldi;
mod dense;

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use arnoldi::{iram, IramOptions, RitzPair, Which};
pub use dense::{dense_eigenvalues, inverse_iteration};

pub type C64 = Complex<f64>;

/// Continuous systems are stable when the spectrum lies in the open left
/// half-plane, discrete ones when it lies in the open unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Continuous,
    Discrete,
}

impl Domain {
    /// Signed distance past the stability boundary: `Re λ` or `|λ| - 1`.
    pub fn measure(self, z: C64) -> f64 {
        match self {
            Domain::Continuous => z.re,
            Domain::Discrete => z.norm() - 1.0,
        }
    }

    pub fn extremal(self) -> Extremal {
        match self {
            Domain::Continuous => Extremal::Rightmost,
            Domain::Discrete => Extremal::Outermost,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremal {
    Rightmost,
    Outermost,
}

impl Extremal {
    pub fn key(self, z: C64) -> f64 {
        match self {
            Extremal::Rightmost => z.re,
            Extremal::Outermost => z.norm(),
        }
    }
}

/// Square operator acting on complex vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    fn apply(&self, w: &DVector<C64>) -> DVector<C64>;

    /// `w ↦ Mᵀw` (plain transpose, no conjugation).
    fn apply_transpose(&self, w: &DVector<C64>) -> DVector<C64>;

    fn apply_adjoint(&self, w: &DVector<C64>) -> DVector<C64> {
        self.apply_transpose(&w.conjugate()).conjugate()
    }

    /// True when the matrix has real entries, so its spectrum is closed under conjugation.
    fn is_real(&self) -> bool;

    /// Cheap upper estimate of `‖M‖₂`.
    fn norm_est(&self) -> f64;

    fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            m.set_column(j, &self.apply(&e));
            e[j] = C64::new(0.0, 0.0);
        }
        m
    }
}

/// Explicitly stored matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    m: DMatrix<C64>,
    real: bool,
    norm: f64,
}

impl DenseOperator {
    pub fn from_real(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "operator must be square");
        DenseOperator {
            m: m.map(|a| C64::new(a, 0.0)),
            real: true,
            norm: m.norm(),
        }
    }

    pub fn from_complex(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "operator must be square");
        let real = m.iter().all(|z| z.im == 0.0);
        let norm = m.norm();
        DenseOperator { m, real, norm }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn apply(&self, w: &DVector<C64>) -> DVector<C64> {
        &self.m * w
    }
    fn apply_transpose(&self, w: &DVector<C64>) -> DVector<C64> {
        self.m.tr_mul(w)
    }
    fn is_real(&self) -> bool {
        self.real
    }
    fn norm_est(&self) -> f64 {
        self.norm
    }
    fn to_dense(&self) -> DMatrix<C64> {
        self.m.clone()
    }
}

/// `(λ, x, y)` with unit eigenvectors. `y` is filled in on demand.
#[derive(Clone, Debug)]
pub struct Eigentriple {
    pub lambda: C64,
    pub x: DVector<C64>,
    pub y: Option<DVector<C64>>,
    /// `‖Mx − λx‖₂`.
    pub residual: f64,
    /// `‖M‖` estimate used to scale tolerances.
    pub norm_est: f64,
}

impl Eigentriple {
    /// `y*x`, or `None` without a left vector.
    pub fn yx(&self) -> Option<C64> {
        self.y.as_ref().map(|y| y.dotc(&self.x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigMethod {
    Auto,
    Dense,
    Arnoldi,
}

/// What to do when several distinct eigenvalues share the extremal measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiePolicy {
    /// Take the one with largest imaginary part (or the one nearest the hint).
    LargestImag,
    /// Report `AmbiguousExtremal`.
    Strict,
}

#[derive(Clone, Debug)]
pub struct EigConfig {
    pub method: EigMethod,
    pub dense_max_dim: usize,
    pub nev: usize,
    pub max_restarts: usize,
    pub tol: f64,
    pub tol_tie: f64,
    pub tie: TiePolicy,
    pub seed: u64,
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig {
            method: EigMethod::Auto,
            dense_max_dim: 500,
            nev: 8,
            max_restarts: 300,
            tol: 1e-12,
            tol_tie: 1e-10,
            tie: TiePolicy::LargestImag,
            seed: 0x5eed,
        }
    }
}

impl EigConfig {
    fn use_dense(&self, n: usize) -> bool {
        match self.method {
            EigMethod::Dense => true,
            EigMethod::Arnoldi => false,
            EigMethod::Auto => n <= self.dense_max_dim,
        }
    }
}

/// Rightmost (or outermost) eigentriple of `op`, canonicalized to `Im λ ≥ 0`
/// for real operators. `y` is left empty unless `want_left`.
pub fn extremal_eigentriple(
    op: &dyn LinearOperator,
    mode: Extremal,
    hint: Option<C64>,
    want_left: bool,
    cfg: &EigConfig,
) -> Result<Eigentriple> {
    if op.dim() == 0 {
        return Err(Error::InvalidArgument("operator of dimension 0".into()));
    }
    let mut e = if cfg.use_dense(op.dim()) {
        dense::extremal(op, mode, hint, cfg)?
    } else {
        arnoldi::extremal(op, mode, hint, cfg)?
    };
    if want_left {
        e.y = Some(left_eigenvector(op, &e, mode, cfg)?);
    }
    Ok(e)
}

/// Up to `k` eigentriples of distinct eigenvalues (one per conjugate pair for
/// real operators), most extremal first, each with its left eigenvector.
///
/// Only the dense path enumerates several; otherwise the extremal one is returned.
pub fn leading_eigentriples(
    op: &dyn LinearOperator,
    mode: Extremal,
    k: usize,
    cfg: &EigConfig,
) -> Result<Vec<Eigentriple>> {
    if cfg.use_dense(op.dim()) && k > 1 {
        dense::leading(op, mode, k, cfg)
    } else {
        Ok(vec![extremal_eigentriple(op, mode, None, true, cfg)?])
    }
}

/// Unit left eigenvector for `e.lambda`, i.e. a solution of `Mᴴy = λ̄y`.
pub fn left_eigenvector(
    op: &dyn LinearOperator,
    e: &Eigentriple,
    mode: Extremal,
    cfg: &EigConfig,
) -> Result<DVector<C64>> {
    if cfg.use_dense(op.dim()) {
        dense::left(op, e.lambda, cfg)
    } else {
        arnoldi::left(op, e.lambda, mode, cfg)
    }
}

/// Rescales `y` by a unimodular factor so that `y*x > 0` (continuous) or
/// `y*x ∈ ℝ₊·λ̄` (discrete).
pub fn rp_normalize(mut e: Eigentriple, domain: Domain) -> Result<Eigentriple> {
    let y =
        e.y.as_mut()
            .ok_or_else(|| Error::InvalidArgument("left eigenvector missing".into()))?;
    let yx = y.dotc(&e.x);
    let tol_ill = 1e-14 * e.norm_est.max(f64::MIN_POSITIVE);
    if yx.norm() <= tol_ill {
        return Err(Error::IllConditionedEigenvalue {
            lambda: e.lambda,
            yx: yx.norm(),
        });
    }
    let mut angle = yx.arg();
    if domain == Domain::Discrete && e.lambda.norm() > 0.0 {
        angle += e.lambda.arg();
    }
    let phase = C64::from_polar(1.0, angle);
    y.iter_mut().for_each(|z| *z *= phase);
    Ok(e)
}

/// Index of the extremal candidate after tie resolution, and whether it must be conjugated.
pub(crate) fn select(
    vals: &[C64],
    mode: Extremal,
    hint: Option<C64>,
    real: bool,
    cfg: &EigConfig,
) -> Result<(usize, bool)> {
    let canon = |z: C64| if real && z.im < 0.0 { z.conj() } else { z };
    let m_max = vals
        .iter()
        .map(|&z| mode.key(z))
        .fold(f64::NEG_INFINITY, f64::max);
    if !m_max.is_finite() {
        return Err(Error::NonConvergence("no finite eigenvalue".into()));
    }
    let tol = cfg.tol_tie * m_max.abs().max(1.0);
    let tied: Vec<usize> = (0..vals.len())
        .filter(|&i| mode.key(vals[i]) >= m_max - tol)
        .collect();

    let mut best = tied[0];
    for &i in &tied[1..] {
        let (a, b) = (canon(vals[i]), canon(vals[best]));
        let better = match hint {
            Some(h) => (a - h).norm() < (b - h).norm(),
            None => a.im > b.im || (a.im == b.im && mode.key(vals[i]) > mode.key(vals[best])),
        };
        if better {
            best = i;
        }
    }
    if cfg.tie == TiePolicy::Strict {
        let b = canon(vals[best]);
        let scale = b.norm().max(1.0);
        if let Some(&i) = tied
            .iter()
            .find(|&&i| (canon(vals[i]) - b).norm() > tol.max(cfg.tol_tie * scale))
        {
            return Err(Error::AmbiguousExtremal {
                a: b,
                b: canon(vals[i]),
            });
        }
    }
    Ok((best, real && vals[best].im < 0.0))
}

/// Rotates `x` so its largest entry is real positive, and normalizes it.
pub(crate) fn canonical_phase(x: &mut DVector<C64>) {
    let nrm = x.norm();
    if nrm == 0.0 {
        return;
    }
    let imax = x.icamax();
    let p = x[imax];
    let rot = if p.norm() > 0.0 {
        p.conj() / p.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    x.iter_mut().for_each(|z| *z = *z * rot / nrm);
}

pub(crate) fn realify(x: &mut DVector<C64>) {
    x.iter_mut().for_each(|z| z.im = 0.0);
    let nrm = x.norm();
    if nrm > 0.0 {
        x.iter_mut().for_each(|z| *z /= nrm);
    }
}

/// Deterministic standard normal start vector, real when `real`.
pub(crate) fn random_unit(n: usize, seed: u64, real: bool) -> DVector<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = if real {
            0.0
        } else {
            StandardNormal.sample(&mut rng)
        };
        C64::new(re, im)
    });
    let nrm = v.norm();
    v /= C64::new(nrm, 0.0);
    v
}

pub(crate) fn residual(op: &dyn LinearOperator, lambda: C64, x: &DVector<C64>) -> f64 {
    (op.apply(x) - x * lambda).norm()
}

/// Builds the triple for the selected eigenvalue from a raw vector.
pub(crate) fn finish(
    op: &dyn LinearOperator,
    lambda: C64,
    mut x: DVector<C64>,
    cfg: &EigConfig,
) -> Eigentriple {
    let norm_est = op.norm_est();
    canonical_phase(&mut x);
    let mut lambda = lambda;
    if op.is_real() && lambda.im != 0.0 && lambda.im.abs() <= cfg.tol_tie * lambda.norm().max(1.0) {
        let mut xr = x.clone();
        realify(&mut xr);
        let lr = C64::new(lambda.re, 0.0);
        if residual(op, lr, &xr) <= 10.0 * cfg.tol * norm_est.max(1.0) {
            lambda = lr;
            x = xr;
        }
    } else if op.is_real() && lambda.im == 0.0 {
        realify(&mut x);
    }
    let res = residual(op, lambda, &x);
    Eigentriple {
        lambda,
        x,
        y: None,
        residual: res,
        norm_est,
    }
}
