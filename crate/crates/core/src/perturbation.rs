//! Factored perturbations `E = UVᴴ` and the scalar fields they live over.

use std::fmt::Debug;

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Scalar type of the perturbation factors.
///
/// Real mode (`f64`) carries rank-2 factors built from real and imaginary
/// parts of eigenvectors; complex mode (`C64`) carries rank-1 factors.
pub trait Field: ComplexField<RealField = f64> + Copy + Debug + Send + Sync + 'static {
    const REAL: bool;

    fn to_c64(self) -> C64;

    fn from_c64(z: C64) -> Self;

    /// `[Re x, Im x]` in real mode, `x` itself in complex mode.
    fn split(x: &DVector<C64>) -> DMatrix<Self>;

    /// Inverse of [`Field::split`]: `col₀ + i·col₁` or `col₀`.
    fn merge(m: &DMatrix<Self>) -> DVector<C64>;
}

impl Field for f64 {
    const REAL: bool = true;

    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn from_c64(z: C64) -> Self {
        z.re
    }
    fn split(x: &DVector<C64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { x[i].re } else { x[i].im })
    }
    fn merge(m: &DMatrix<f64>) -> DVector<C64> {
        DVector::from_fn(m.nrows(), |i, _| {
            C64::new(m[(i, 0)], if m.ncols() > 1 { m[(i, 1)] } else { 0.0 })
        })
    }
}

impl Field for C64 {
    const REAL: bool = false;

    fn to_c64(self) -> C64 {
        self
    }
    fn from_c64(z: C64) -> Self {
        z
    }
    fn split(x: &DVector<C64>) -> DMatrix<C64> {
        DMatrix::from_column_slice(x.len(), 1, x.as_slice())
    }
    fn merge(m: &DMatrix<C64>) -> DVector<C64> {
        m.column(0).into_owned()
    }
}

pub(crate) fn to_c64<T: Field>(m: &DMatrix<T>) -> DMatrix<C64> {
    m.map(|z| z.to_c64())
}

pub(crate) fn lift<T: Field>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_real)
}

/// `‖UVᴴ‖_F = ‖R_U R_Vᴴ‖_F` from the triangular QR factors, which stays
/// accurate when the columns of `UVᴴ` nearly cancel.
pub fn fro_norm_factored<T: Field>(u: &DMatrix<T>, v: &DMatrix<T>) -> f64 {
    let ru = u.clone().qr().r();
    let rv = v.clone().qr().r();
    (ru * rv.adjoint()).norm()
}

/// `⟨U₁V₁ᴴ, U₂V₂ᴴ⟩ = Re tr((U₁ᴴU₂)(V₂ᴴV₁))`.
pub fn inner_factored<T: Field>(
    u1: &DMatrix<T>,
    v1: &DMatrix<T>,
    u2: &DMatrix<T>,
    v2: &DMatrix<T>,
) -> f64 {
    let g = u1.ad_mul(u2) * v2.ad_mul(v1);
    g.trace().real()
}

/// `E = UVᴴ` with `U` p×r and `V` m×r.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation<T: Field> {
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
}

impl<T: Field> Perturbation<T> {
    pub fn new(u: DMatrix<T>, v: DMatrix<T>) -> Result<Self> {
        if u.ncols() != v.ncols() || u.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "factors have {} and {} columns",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(Perturbation { u, v })
    }

    /// Scales both factors by `‖UVᴴ‖_F^{-1/2}`; `None` when the product vanishes.
    pub fn normalized(u: DMatrix<T>, v: DMatrix<T>) -> Option<Self> {
        let nrm = fro_norm_factored(&u, &v);
        if !(nrm.is_finite() && nrm > f64::MIN_POSITIVE) {
            return None;
        }
        let s = T::from_real(nrm.sqrt().recip());
        Some(Perturbation { u: u * s, v: v * s })
    }

    pub fn p(&self) -> usize {
        self.u.nrows()
    }

    pub fn m(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm_factored(&self.u, &self.v)
    }

    /// Explicit p×m product; for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<T> {
        &self.u * self.v.adjoint()
    }

    /// Same product with both factors negated, which flips the cross terms of an interpolation path.
    pub fn flipped(&self) -> Self {
        let s = T::from_real(-1.0);
        Perturbation {
            u: &self.u * s,
            v: &self.v * s,
        }
    }

    /// `−UVᴴ`.
    pub fn negated(&self) -> Self {
        Perturbation { u: -&self.u, v: self.v.clone() }
    }

    /// Pads both factors with zero columns up to rank `r`; the product is unchanged.
    pub fn with_rank(&self, r: usize) -> Self {
        if self.rank() >= r {
            return self.clone();
        }
        let pad = |m: &DMatrix<T>| m.clone().resize_horizontally(r, T::zero());
        Perturbation {
            u: pad(&self.u),
            v: pad(&self.v),
        }
    }

    /// Renormalized point `t` of the way along the factor-wise segment from `self` to `other`.
    pub fn interpolate(&self, other: &Self, t: f64) -> Option<Self> {
        let (a, b) = (T::from_real(1.0 - t), T::from_real(t));
        Perturbation::normalized(&self.u * a + &other.u * b, &self.v * a + &other.v * b)
    }
}
