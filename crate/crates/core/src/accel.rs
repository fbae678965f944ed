//! Vector extrapolation of perturbation sequences.
//!
//! The sequence `E_k = U_kV_kᴴ` is tracked through a few of its rows and
//! columns only. Minimal polynomial extrapolation is applied to those entries,
//! and the limit is rebuilt as a skeleton `C·W⁻¹·R`, where `W` is the block where
//! the rows and columns overlap.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::eval::Evaluator;
use crate::linalg::Eigentriple;
use crate::perturbation::{Field, Perturbation};

/// Candidates whose row and column extrapolations disagree by more than this
/// (relative to the overlap block) are rejected.
pub const ACCEPT_TOL: f64 = 1e-8;

/// Minimal polynomial extrapolation of a vector sequence.
///
/// Returns `None` when the weights cannot be normalized (their sum vanishes).
pub fn mpe<T: Field>(xs: &[DVector<T>]) -> Option<DVector<T>> {
    let k = xs.len();
    if k < 2 {
        return xs.last().cloned();
    }
    let diffs: Vec<DVector<T>> = xs.windows(2).map(|w| &w[1] - &w[0]).collect();
    let scale = xs
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if diffs.iter().all(|d| d.norm() <= 1e-15 * scale) {
        return xs.last().cloned();
    }
    let q = diffs.len() - 1;
    let mut c = vec![T::one(); q + 1];
    if q > 0 {
        let a = DMatrix::from_columns(&diffs[..q]);
        let b = -&diffs[q];
        let sol = a.svd(true, true).solve(&b, 1e-13 * scale).ok()?;
        for (ci, s) in c.iter_mut().zip(sol.iter()) {
            *ci = *s;
        }
    }
    let sum = c.iter().fold(T::zero(), |acc, &z| acc + z);
    if sum.modulus() <= 1e-10 * c.iter().map(|z| z.modulus()).fold(0.0, f64::max) {
        return None;
    }
    let mut s = DVector::zeros(xs[0].len());
    for (ci, x) in c.iter().zip(xs) {
        s += x * (*ci / sum);
    }
    Some(s)
}

/// MPE limit, rejected when it collapses relative to the iterates, as for
/// sign-alternating sequences.
fn nonvanishing_limit<T: Field>(seq: &[DVector<T>]) -> Option<DVector<T>> {
    let s = mpe(seq)?;
    let scale = seq.iter().map(|x| x.norm()).fold(0.0, f64::max);
    (s.norm() > 1e-8 * scale).then_some(s)
}

fn top_rows<T: Field>(m: &DMatrix<T>, r: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&a, &b| m.row(b).norm().total_cmp(&m.row(a).norm()).then(a.cmp(&b)));
    idx.truncate(r);
    idx.sort_unstable();
    idx
}

/// Extrapolated unit-norm perturbation from a window of iterates (oldest first).
pub fn extrapolate_rank2<T: Field>(window: &[Perturbation<T>]) -> Option<Perturbation<T>> {
    let first = window.first()?;
    let r = first.rank();
    if window
        .iter()
        .any(|p| p.u.shape() != first.u.shape() || p.v.shape() != first.v.shape())
    {
        return None;
    }
    let (p, m) = (first.p(), first.m());
    if p <= r || m <= r {
        return extrapolate_full(window, r);
    }
    let rows = top_rows(&first.u, r);
    let cols = top_rows(&first.v, r);
    let seq: Vec<DVector<T>> = window
        .iter()
        .map(|e| {
            let rs = e.u.select_rows(&rows) * e.v.adjoint();
            let cs = &e.u * e.v.select_rows(&cols).adjoint();
            DVector::from_iterator(r * (p + m), rs.iter().chain(cs.iter()).copied())
        })
        .collect();
    let s = nonvanishing_limit(&seq)?;
    let rs = DMatrix::from_column_slice(r, m, &s.as_slice()[..r * m]);
    let cs = DMatrix::from_column_slice(p, r, &s.as_slice()[r * m..]);
    let w = cs.select_rows(&rows);
    let w_norm = w.norm();
    if !(w_norm > 0.0) {
        return None;
    }
    let resid = (rs.select_columns(&cols) - &w).norm() / w_norm;
    if resid > ACCEPT_TOL {
        return None;
    }
    let svals = w.clone().svd(false, false).singular_values;
    if svals.min() <= 1e-12 * svals.max() {
        return None;
    }
    let winv = w.try_inverse()?;
    Perturbation::normalized(cs * winv, rs.adjoint())
}

/// Small factors: extrapolate every entry of `E` and truncate to rank `r` by SVD.
fn extrapolate_full<T: Field>(window: &[Perturbation<T>], r: usize) -> Option<Perturbation<T>> {
    let (p, m) = (window[0].p(), window[0].m());
    let seq: Vec<DVector<T>> = window
        .iter()
        .map(|e| DVector::from_column_slice(e.to_dense().as_slice()))
        .collect();
    let s = nonvanishing_limit(&seq)?;
    let e = DMatrix::from_column_slice(p, m, s.as_slice());
    let svd = e.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let k = r.min(svd.singular_values.len());
    let mut uf = DMatrix::zeros(p, r);
    let mut vf = DMatrix::zeros(m, r);
    for j in 0..k {
        let sj = T::from_real(svd.singular_values[j]);
        uf.set_column(j, &(u.column(j) * sj));
        vf.set_column(j, &vt.row(j).adjoint());
    }
    Perturbation::normalized(uf, vf)
}

/// Evaluates the candidate (one right solve) and keeps it only if it strictly
/// improves the measure over `current`.
pub fn try_accept_extrapolation<T: Field>(
    ev: &mut Evaluator<'_>,
    eps: f64,
    candidate: &Perturbation<T>,
    current: &Eigentriple,
) -> Result<Option<(Perturbation<T>, Eigentriple)>> {
    let e = ev.right(candidate, eps)?;
    if ev.measure(e.lambda) > ev.measure(current.lambda) {
        Ok(Some((candidate.clone(), e)))
    } else {
        Ok(None)
    }
}
