use nalgebra::{DMatrix, DVector, Schur};

use super::{finish, random_unit, select, EigConfig, Eigentriple, Extremal, LinearOperator, C64};
use crate::error::{Error, Result};

/// All eigenvalues of a real matrix, via the real Schur form.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 + 100 * n)
        .ok_or_else(|| Error::NonConvergence("real Schur iteration".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn complex_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    Schur::try_new(m.clone(), f64::EPSILON, 1000 + 100 * n)
        .and_then(|s| s.eigenvalues())
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::NonConvergence("complex Schur iteration".into()))
}

/// Unit eigenvector of `m` for the eigenvalue nearest `shift`.
///
/// Starts from a seeded random vector and solves with `m − shift·I` until the
/// residual settles. An exactly singular factorization nudges the shift.
pub fn inverse_iteration(m: &DMatrix<C64>, shift: C64, seed: u64) -> Option<DVector<C64>> {
    let n = m.nrows();
    if n == 1 {
        return Some(DVector::from_element(1, C64::new(1.0, 0.0)));
    }
    let scale = m.norm().max(1e-150);
    let real = shift.im == 0.0 && m.iter().all(|z| z.im == 0.0);
    let mut s = shift;
    for attempt in 0..6 {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= s;
        }
        let lu = a.lu();
        let mut v = random_unit(n, seed ^ attempt, real);
        let mut ok = false;
        for _ in 0..8 {
            let Some(w) = lu.solve(&v) else { break };
            let nw = w.norm();
            if !nw.is_finite() || nw == 0.0 {
                break;
            }
            v = w.unscale(nw);
            ok = true;
            let res = (m * &v - &v * shift).norm();
            if res <= 1e-14 * scale {
                break;
            }
        }
        if ok {
            return Some(v);
        }
        let bump = scale * f64::EPSILON * 4f64.powi(attempt as i32 + 1);
        s = shift + C64::new(bump, bump);
    }
    None
}

pub(super) fn extremal(
    op: &dyn LinearOperator,
    mode: Extremal,
    hint: Option<C64>,
    cfg: &EigConfig,
) -> Result<Eigentriple> {
    let m = op.to_dense();
    let vals = if op.is_real() {
        dense_eigenvalues(&m.map(|z| z.re))?
    } else {
        complex_eigenvalues(&m)?
    };
    let (i, flip) = select(&vals, mode, hint, op.is_real(), cfg)?;
    let lambda = if flip { vals[i].conj() } else { vals[i] };
    let x = inverse_iteration(&m, lambda, cfg.seed)
        .ok_or_else(|| Error::NonConvergence(format!("inverse iteration at {lambda}")))?;
    Ok(finish(op, lambda, x, cfg))
}

pub(super) fn left(op: &dyn LinearOperator, lambda: C64, cfg: &EigConfig) -> Result<DVector<C64>> {
    let mh = op.to_dense().adjoint();
    let mut y = inverse_iteration(&mh, lambda.conj(), cfg.seed.wrapping_add(1))
        .ok_or_else(|| Error::NonConvergence(format!("left inverse iteration at {lambda}")))?;
    if op.is_real() && lambda.im == 0.0 {
        super::canonical_phase(&mut y);
        super::realify(&mut y);
    }
    Ok(y)
}

pub(super) fn leading(
    op: &dyn LinearOperator,
    mode: Extremal,
    k: usize,
    cfg: &EigConfig,
) -> Result<Vec<Eigentriple>> {
    let m = op.to_dense();
    let real = op.is_real();
    let mut vals = if real {
        dense_eigenvalues(&m.map(|z| z.re))?
    } else {
        complex_eigenvalues(&m)?
    };
    if real {
        vals.retain(|z| z.im >= 0.0);
    }
    vals.sort_by(|a, b| mode.key(*b).total_cmp(&mode.key(*a)));
    let scale = m.norm().max(1.0);
    let mut picked: Vec<C64> = Vec::new();
    for z in vals {
        if picked.len() == k {
            break;
        }
        if picked.iter().all(|p| (p - z).norm() > 1e-8 * scale) {
            picked.push(z);
        }
    }
    let mut out = Vec::with_capacity(picked.len());
    for lambda in picked {
        let Some(x) = inverse_iteration(&m, lambda, cfg.seed) else {
            continue;
        };
        let mut e = finish(op, lambda, x, cfg);
        e.y = Some(left(op, e.lambda, cfg)?);
        out.push(e);
    }
    Ok(out)
}
