//! Independent reference values for small systems: frequency-grid scans of the
//! transfer function and the unstructured μ-value.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dense_eigenvalues, Domain, C64};
use crate::system::StateSpaceSystem;

/// Largest state dimension the grid oracles accept.
pub const MAX_ORACLE_DIM: usize = 200;

const GRID: usize = 4000;
const CLUSTER: usize = 201;

/// `G(s)` evaluated through a Hessenberg form of `A`, `O(n²)` per point.
pub struct FrequencyResponse {
    h: DMatrix<f64>,
    qtb: DMatrix<f64>,
    cq: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: Domain,
    poles: Vec<C64>,
}

impl FrequencyResponse {
    pub fn new(sys: &StateSpaceSystem) -> Result<Self> {
        if sys.n() > MAX_ORACLE_DIM {
            return Err(Error::InvalidArgument(format!(
                "oracle limited to n <= {MAX_ORACLE_DIM}, got {}",
                sys.n()
            )));
        }
        let a = sys.a().to_dense();
        let poles = dense_eigenvalues(&a)?;
        let hess = a.hessenberg();
        let (q, h) = hess.unpack();
        Ok(FrequencyResponse {
            qtb: q.tr_mul(sys.b()),
            cq: sys.c() * &q,
            h,
            d: sys.d().clone(),
            domain: sys.domain(),
            poles,
        })
    }

    /// Point on the stability boundary at frequency `w`: `iw` or `e^{iw}`.
    pub fn boundary_point(&self, w: f64) -> C64 {
        match self.domain {
            Domain::Continuous => C64::new(0.0, w),
            Domain::Discrete => C64::from_polar(1.0, w),
        }
    }

    pub fn eval(&self, s: C64) -> Result<DMatrix<C64>> {
        let x = hessenberg_solve(&self.h, s, &self.qtb.map(|v| C64::new(v, 0.0)))
            .ok_or(Error::SingularShift(s))?;
        Ok(self.cq.map(|v| C64::new(v, 0.0)) * x + self.d.map(|v| C64::new(v, 0.0)))
    }

    pub fn at(&self, w: f64) -> Result<DMatrix<C64>> {
        self.eval(self.boundary_point(w))
    }

    /// Frequencies to scan: a log grid plus clusters around every pole.
    pub fn grid(&self, density: usize) -> Vec<f64> {
        let mut w = vec![0.0];
        match self.domain {
            Domain::Continuous => {
                let mags: Vec<f64> = self
                    .poles
                    .iter()
                    .map(|p| p.norm())
                    .filter(|&m| m > 0.0)
                    .collect();
                let lo = mags.iter().copied().fold(f64::INFINITY, f64::min).min(1.0) * 1e-4;
                let hi = mags.iter().copied().fold(0.0, f64::max).max(1.0) * 1e4;
                let (l0, l1) = (lo.log10(), hi.log10());
                for i in 0..density {
                    w.push(10f64.powf(l0 + (l1 - l0) * i as f64 / (density - 1) as f64));
                }
                for p in &self.poles {
                    let width = p.re.abs().max(1e-12 * p.norm().max(1.0));
                    for j in 0..CLUSTER {
                        let t = -20.0 + 40.0 * j as f64 / (CLUSTER - 1) as f64;
                        let x = p.im.abs() + t * width;
                        if x > 0.0 {
                            w.push(x);
                        }
                    }
                }
            }
            Domain::Discrete => {
                for i in 1..=density {
                    w.push(std::f64::consts::PI * i as f64 / density as f64);
                }
                for p in &self.poles {
                    let width = (1.0 - p.norm()).abs().max(1e-12);
                    for j in 0..CLUSTER {
                        let t = -20.0 + 40.0 * j as f64 / (CLUSTER - 1) as f64;
                        let x = p.arg().abs() + t * width;
                        if x > 0.0 && x < std::f64::consts::PI {
                            w.push(x);
                        }
                    }
                }
            }
        }
        w.sort_by(f64::total_cmp);
        w.dedup();
        w
    }
}

/// Solves `(sI − H)x = rhs` for upper Hessenberg `H` with adjacent-row pivoting.
fn hessenberg_solve(h: &DMatrix<f64>, s: C64, rhs: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let n = h.nrows();
    let mut t = h.map(|v| C64::new(-v, 0.0));
    for i in 0..n {
        t[(i, i)] += s;
    }
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let mut x = rhs.clone();
    for k in 0..n.saturating_sub(1) {
        if t[(k + 1, k)].norm() > t[(k, k)].norm() {
            t.swap_rows(k, k + 1);
            x.swap_rows(k, k + 1);
        }
        let piv = t[(k, k)];
        if piv.norm() <= 1e-14 * scale {
            return None;
        }
        let f = t[(k + 1, k)] / piv;
        if f.norm() != 0.0 {
            for j in k..n {
                let v = t[(k, j)];
                t[(k + 1, j)] -= f * v;
            }
            for j in 0..x.ncols() {
                let v = x[(k, j)];
                x[(k + 1, j)] -= f * v;
            }
        }
    }
    if t[(n - 1, n - 1)].norm() <= 1e-14 * scale {
        return None;
    }
    for j in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in (i + 1)..n {
                acc -= t[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / t[(i, i)];
        }
    }
    Some(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOracle {
    /// Reference radius; infinite when no destabilizing perturbation exists.
    pub radius: f64,
    /// Frequency attaining it, `None` when the `‖D‖₂⁻¹` term is active or the radius is infinite.
    pub omega: Option<f64>,
    /// Doubling the grid density changed the answer by more than 1e-8 relative.
    pub grid_too_coarse: bool,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Real radius of a single-input single-output system:
/// `min{1/|G(iω)| : G(iω) ∈ ℝ}`, together with `1/|D|`.
pub fn siso_grid(sys: &StateSpaceSystem) -> Result<GridOracle> {
    if sys.p() != 1 || sys.m() != 1 {
        return Err(Error::InvalidArgument("siso-grid needs p = m = 1".into()));
    }
    let fr = FrequencyResponse::new(sys)?;
    let coarse = siso_scan(&fr, GRID)?;
    let fine = siso_scan(&fr, 2 * GRID)?;
    Ok(GridOracle {
        grid_too_coarse: rel_diff(coarse.0, fine.0) > 1e-8,
        radius: fine.0,
        omega: fine.1,
    })
}

fn siso_scan(fr: &FrequencyResponse, density: usize) -> Result<(f64, Option<f64>)> {
    let g = |w: f64| fr.at(w).map(|m| m[(0, 0)]);
    let d = fr.d[(0, 0)];
    let mut best = (
        if d == 0.0 {
            f64::INFINITY
        } else {
            1.0 / d.abs()
        },
        None,
    );
    let consider = |val: C64, w: f64, best: &mut (f64, Option<f64>)| {
        if val.re != 0.0 && 1.0 / val.re.abs() < best.0 {
            *best = (1.0 / val.re.abs(), Some(w));
        }
    };
    let grid = fr.grid(density);
    let mut prev: Option<(f64, C64)> = None;
    for &w in &grid {
        let gw = g(w)?;
        let real_axis = w == 0.0 || (fr.domain == Domain::Discrete && w == std::f64::consts::PI);
        if real_axis || gw.im == 0.0 {
            consider(gw, w, &mut best);
        }
        if let Some((w0, g0)) = prev {
            if g0.im != 0.0 && gw.im != 0.0 && g0.im.signum() != gw.im.signum() {
                let (mut a, mut b, mut fa) = (w0, w, g0.im);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    let gm = g(mid)?;
                    if gm.im == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if gm.im.signum() == fa.signum() {
                        a = mid;
                        fa = gm.im;
                    } else {
                        b = mid;
                    }
                }
                let wr = 0.5 * (a + b);
                consider(g(wr)?, wr, &mut best);
            }
        }
        prev = Some((w, gw));
    }
    if fr.domain == Domain::Discrete {
        consider(g(std::f64::consts::PI)?, std::f64::consts::PI, &mut best);
    }
    Ok(best)
}

fn sigma_max(g: &DMatrix<C64>) -> f64 {
    g.clone().svd(false, false).singular_values.max()
}

/// Complex radius `1/max(sup_ω ‖G(iω)‖₂, ‖D‖₂)` by a grid scan refined with golden-section search.
pub fn complex_grid(sys: &StateSpaceSystem) -> Result<GridOracle> {
    let fr = FrequencyResponse::new(sys)?;
    let coarse = complex_scan(&fr, GRID)?;
    let fine = complex_scan(&fr, 2 * GRID)?;
    Ok(GridOracle {
        grid_too_coarse: rel_diff(coarse.0, fine.0) > 1e-8,
        radius: fine.0,
        omega: fine.1,
    })
}

fn complex_scan(fr: &FrequencyResponse, density: usize) -> Result<(f64, Option<f64>)> {
    let grid = fr.grid(density);
    let vals: Vec<f64> = grid
        .iter()
        .map(|&w| fr.at(w).map(|g| sigma_max(&g)))
        .collect::<Result<_>>()?;
    let d_norm = sigma_max(&fr.d.map(|v| C64::new(v, 0.0)));
    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            (i == 0 || vals[i] >= vals[i - 1]) && (i + 1 == grid.len() || vals[i] >= vals[i + 1])
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(12);
    let mut best = (d_norm, None);
    for i in peaks {
        let lo = if i == 0 { grid[0] } else { grid[i - 1] };
        let hi = if i + 1 == grid.len() {
            grid[i]
        } else {
            grid[i + 1]
        };
        let (w, v) = golden_max(
            |w| fr.at(w).map(|g| sigma_max(&g)),
            lo,
            hi,
            vals[i],
            grid[i],
        )?;
        if v > best.0 {
            best = (v, Some(w));
        }
    }
    let radius = if best.0 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / best.0
    };
    Ok((radius, best.1))
}

fn golden_max(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    f0: f64,
    w0: f64,
) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = (w0, f0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if b - a <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    for (w, v) in [(c, fc), (d, fd)] {
        if v > best.1 {
            best = (w, v);
        }
    }
    Ok(best)
}

/// Unstructured μ-value of a real matrix with the constructive minimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct MuReport {
    /// `μ(H) = ‖H‖₂`.
    pub mu: f64,
    /// `Δ = v₁u₁ᵀ/σ₁`, absent when `H = 0`.
    pub delta: Option<DMatrix<f64>>,
    pub delta_fro: f64,
    pub delta_spec: f64,
    /// `|det(I − HΔ)|`.
    pub det_residual: f64,
}

pub fn mu_eckart(h: &DMatrix<f64>) -> MuReport {
    let svd = h.clone().svd(true, true);
    let (k, sigma) =
        svd.singular_values.iter().enumerate().fold(
            (0, 0.0),
            |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
        );
    if sigma == 0.0 {
        return MuReport {
            mu: 0.0,
            delta: None,
            delta_fro: f64::INFINITY,
            delta_spec: f64::INFINITY,
            det_residual: f64::NAN,
        };
    }
    let u = svd.u.expect("requested").column(k).into_owned();
    let v: DVector<f64> = svd.v_t.expect("requested").row(k).transpose();
    let delta = &v * u.transpose() / sigma;
    let m = h.nrows();
    let det = (DMatrix::<f64>::identity(m, m) - h * &delta)
        .determinant()
        .abs();
    let delta_spec = crate::system::spectral_norm(&delta);
    MuReport {
        mu: sigma,
        delta_fro: delta.norm(),
        delta_spec,
        det_residual: det,
        delta: Some(delta),
    }
}
