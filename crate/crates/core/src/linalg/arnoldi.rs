//! Implicitly restarted Arnoldi in complex arithmetic with exact shifts.

use nalgebra::{DMatrix, DVector, Schur};

use super::{
    finish, inverse_iteration, random_unit, select, EigConfig, Eigentriple, Extremal,
    LinearOperator, C64,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Which {
    LargestReal,
    LargestMagnitude,
}

impl Which {
    fn key(self, z: C64) -> f64 {
        match self {
            Which::LargestReal => z.re,
            Which::LargestMagnitude => z.norm(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IramOptions {
    pub nev: usize,
    pub ncv: Option<usize>,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl From<&EigConfig> for IramOptions {
    fn from(cfg: &EigConfig) -> Self {
        IramOptions {
            nev: cfg.nev,
            ncv: None,
            max_restarts: cfg.max_restarts,
            tol: cfg.tol,
            seed: cfg.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RitzPair {
    pub value: C64,
    pub vector: DVector<C64>,
    /// Arnoldi residual estimate `β|eₘᵀs|`.
    pub residual: f64,
}

struct Factorization {
    v: DMatrix<C64>,
    h: DMatrix<C64>,
    f: DVector<C64>,
}

/// Converged Ritz pairs for the `nev` eigenvalues of largest `which` key,
/// sorted by that key in decreasing order.
pub fn iram(op: &dyn LinearOperator, which: Which, opts: &IramOptions) -> Result<Vec<RitzPair>> {
    let n = op.dim();
    let nev = opts.nev.clamp(1, n);
    let ncv = opts.ncv.unwrap_or((2 * nev + 10).max(20)).clamp(nev, n);
    let norm = op.norm_est().max(f64::MIN_POSITIVE);
    let real = op.is_real();

    let mut fac = Factorization {
        v: DMatrix::zeros(n, ncv),
        h: DMatrix::zeros(ncv, ncv),
        f: random_unit(n, opts.seed, real),
    };
    let mut restart_seed = opts.seed;
    extend(op, &mut fac, 0, norm, &mut restart_seed);

    for _ in 0..=opts.max_restarts {
        let ritz = Schur::try_new(fac.h.clone(), f64::EPSILON, 10_000)
            .and_then(|s| s.eigenvalues())
            .ok_or_else(|| Error::NonConvergence("Schur of Hessenberg matrix".into()))?;
        let mut theta: Vec<C64> = ritz.iter().copied().collect();
        theta.sort_by(|a, b| which.key(*b).total_cmp(&which.key(*a)));

        let beta = fac.f.norm();
        let mut pairs = Vec::with_capacity(nev);
        for (i, &t) in theta.iter().take(nev).enumerate() {
            let s = inverse_iteration(&fac.h, t, opts.seed.wrapping_add(i as u64))
                .ok_or_else(|| Error::NonConvergence("Ritz vector".into()))?;
            let residual = beta * s[ncv - 1].norm();
            pairs.push((t, s, residual));
        }
        let nconv = pairs.iter().filter(|p| p.2 <= opts.tol * norm).count();
        if nconv == pairs.len() || ncv == n {
            return Ok(pairs
                .into_iter()
                .map(|(value, s, residual)| {
                    let mut vector = &fac.v * s;
                    let nrm = vector.norm();
                    vector.unscale_mut(nrm);
                    RitzPair {
                        value,
                        vector,
                        residual,
                    }
                })
                .collect());
        }

        let k = (nev + nconv.min((ncv - nev) / 2)).min(ncv - 1);
        let mut q = DMatrix::<C64>::identity(ncv, ncv);
        for &mu in &theta[k..] {
            qr_step(&mut fac.h, &mut q, mu);
        }
        let f_new = &fac.v * q.column(k) * fac.h[(k, k - 1)] + &fac.f * q[(ncv - 1, k - 1)];
        let vk = &fac.v * q.columns(0, k);
        fac.v.columns_mut(0, k).copy_from(&vk);
        let hk = fac.h.view((0, 0), (k, k)).clone_owned();
        fac.h.fill(C64::new(0.0, 0.0));
        fac.h.view_mut((0, 0), (k, k)).copy_from(&hk);
        fac.f = f_new;
        extend(op, &mut fac, k, norm, &mut restart_seed);
    }
    Err(Error::NonConvergence(format!(
        "Arnoldi exceeded {} restarts",
        opts.max_restarts
    )))
}

/// Grows a length-`k` Arnoldi factorization to full length with DGKS reorthogonalization.
fn extend(op: &dyn LinearOperator, fac: &mut Factorization, k: usize, norm: f64, seed: &mut u64) {
    let (n, ncv) = fac.v.shape();
    for j in k..ncv {
        let beta = fac.f.norm();
        if j > 0 && beta > 1e-14 * norm {
            fac.h[(j, j - 1)] = C64::new(beta, 0.0);
            fac.f.unscale_mut(beta);
        } else if j > 0 {
            // Invariant subspace found; continue from a fresh orthogonal direction.
            fac.h[(j, j - 1)] = C64::new(0.0, 0.0);
            *seed = seed.wrapping_add(0x9e37_79b9);
            let mut r = random_unit(n, *seed, op.is_real());
            for _ in 0..2 {
                let vj = fac.v.columns(0, j);
                let c = vj.ad_mul(&r);
                r -= vj * c;
            }
            let nr = r.norm();
            fac.f = r.unscale(nr);
        } else {
            let nf = fac.f.norm();
            fac.f.unscale_mut(nf);
        }
        fac.v.set_column(j, &fac.f);
        let mut w = op.apply(&fac.f);
        let vj = fac.v.columns(0, j + 1);
        let mut h = vj.ad_mul(&w);
        w -= &vj * &h;
        let h2 = vj.ad_mul(&w);
        w -= &vj * &h2;
        h += h2;
        fac.h.view_mut((0, j), (j + 1, 1)).copy_from(&h);
        fac.f = w;
    }
}

/// One explicitly shifted QR step `H ← QᴴHQ` on an upper Hessenberg matrix, accumulating `Q`.
fn qr_step(h: &mut DMatrix<C64>, q: &mut DMatrix<C64>, mu: C64) {
    let m = h.nrows();
    for i in 0..m {
        h[(i, i)] -= mu;
    }
    let mut rots = Vec::with_capacity(m.saturating_sub(1));
    for j in 0..m.saturating_sub(1) {
        let (c, s) = givens(h[(j, j)], h[(j + 1, j)]);
        for col in j..m {
            let (a, b) = (h[(j, col)], h[(j + 1, col)]);
            h[(j, col)] = a * c + s * b;
            h[(j + 1, col)] = -s.conj() * a + b * c;
        }
        h[(j + 1, j)] = C64::new(0.0, 0.0);
        rots.push((c, s));
    }
    for (j, &(c, s)) in rots.iter().enumerate() {
        let rows = (j + 2).min(m);
        for i in 0..rows {
            let (a, b) = (h[(i, j)], h[(i, j + 1)]);
            h[(i, j)] = a * c + b * s.conj();
            h[(i, j + 1)] = -a * s + b * c;
        }
        for i in 0..m {
            let (a, b) = (q[(i, j)], q[(i, j + 1)]);
            q[(i, j)] = a * c + b * s.conj();
            q[(i, j + 1)] = -a * s + b * c;
        }
    }
    for i in 0..m {
        h[(i, i)] += mu;
    }
    for j in 0..m {
        for i in (j + 2)..m {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
}

/// Rotation `[c s; −s̄ c]` with real `c` mapping `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let r = na.hypot(nb);
    (na / r, (a / na) * b.conj() / r)
}

struct Shifted<'a> {
    inner: &'a dyn LinearOperator,
    sigma: f64,
}

impl LinearOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, w: &DVector<C64>) -> DVector<C64> {
        self.inner.apply(w) + w * C64::new(self.sigma, 0.0)
    }
    fn apply_transpose(&self, w: &DVector<C64>) -> DVector<C64> {
        self.inner.apply_transpose(w) + w * C64::new(self.sigma, 0.0)
    }
    fn is_real(&self) -> bool {
        self.inner.is_real()
    }
    fn norm_est(&self) -> f64 {
        self.inner.norm_est() + self.sigma
    }
}

struct Adjoint<'a>(&'a dyn LinearOperator);

impl LinearOperator for Adjoint<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, w: &DVector<C64>) -> DVector<C64> {
        self.0.apply_adjoint(w)
    }
    fn apply_transpose(&self, w: &DVector<C64>) -> DVector<C64> {
        self.0.apply(&w.conjugate()).conjugate()
    }
    fn is_real(&self) -> bool {
        self.0.is_real()
    }
    fn norm_est(&self) -> f64 {
        self.0.norm_est()
    }
}

fn ritz_pairs(op: &dyn LinearOperator, mode: Extremal, cfg: &EigConfig) -> Result<Vec<RitzPair>> {
    let opts = IramOptions::from(cfg);
    match mode {
        Extremal::Outermost => iram(op, Which::LargestMagnitude, &opts),
        Extremal::Rightmost => match iram(op, Which::LargestReal, &opts) {
            Ok(p) => Ok(p),
            Err(_) => {
                let sigma = op.norm_est();
                let shifted = Shifted { inner: op, sigma };
                let mut pairs = iram(&shifted, Which::LargestMagnitude, &opts)?;
                for p in &mut pairs {
                    p.value -= C64::new(sigma, 0.0);
                }
                pairs.sort_by(|a, b| b.value.re.total_cmp(&a.value.re));
                Ok(pairs)
            }
        },
    }
}

pub(super) fn extremal(
    op: &dyn LinearOperator,
    mode: Extremal,
    hint: Option<C64>,
    cfg: &EigConfig,
) -> Result<Eigentriple> {
    let pairs = ritz_pairs(op, mode, cfg)?;
    let vals: Vec<C64> = pairs.iter().map(|p| p.value).collect();
    let (i, flip) = select(&vals, mode, hint, op.is_real(), cfg)?;
    let (lambda, x) = if flip {
        (vals[i].conj(), pairs[i].vector.conjugate())
    } else {
        (vals[i], pairs[i].vector.clone())
    };
    Ok(finish(op, lambda, x, cfg))
}

pub(super) fn left(
    op: &dyn LinearOperator,
    lambda: C64,
    mode: Extremal,
    cfg: &EigConfig,
) -> Result<DVector<C64>> {
    let adj = Adjoint(op);
    let pairs = ritz_pairs(&adj, mode, cfg)?;
    let target = lambda.conj();
    let best = pairs
        .iter()
        .map(|p| {
            if op.is_real() && (p.value.conj() - target).norm() < (p.value - target).norm() {
                (p.value.conj(), p.vector.conjugate())
            } else {
                (p.value, p.vector.clone())
            }
        })
        .min_by(|a, b| (a.0 - target).norm().total_cmp(&(b.0 - target).norm()))
        .ok_or_else(|| Error::NonConvergence("no Ritz values for the adjoint".into()))?;
    if (best.0 - target).norm() > 1e-6 * lambda.norm().max(1.0) {
        return Err(Error::NonConvergence(format!(
            "adjoint solve missed {target} (got {})",
            best.0
        )));
    }
    let mut y = best.1;
    super::canonical_phase(&mut y);
    if op.is_real() && lambda.im == 0.0 {
        super::realify(&mut y);
    }
    Ok(y)
}
