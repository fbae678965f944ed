//! State-space systems and the perturbed system matrix `M(Δ) = A + BΔ(I − DΔ)⁻¹C`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::linalg::{extremal_eigentriple, Domain, EigConfig, Eigentriple, LinearOperator, C64};
use crate::perturbation::{lift, to_c64, Field, Perturbation};

/// The state matrix `A`, dense or compressed sparse row.
#[derive(Clone, Debug)]
pub enum StateMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix<f64>),
}

impl StateMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            StateMatrix::Dense(a) => a.nrows(),
            StateMatrix::Sparse(a) => a.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            StateMatrix::Dense(a) => a.ncols(),
            StateMatrix::Sparse(a) => a.ncols(),
        }
    }

    pub fn mul_c(&self, w: &DVector<C64>) -> DVector<C64> {
        match self {
            StateMatrix::Dense(a) => {
                let re = a * w.map(|z| z.re);
                let im = a * w.map(|z| z.im);
                DVector::from_fn(re.len(), |i, _| C64::new(re[i], im[i]))
            }
            StateMatrix::Sparse(a) => {
                let mut out = DVector::zeros(a.nrows());
                for (i, row) in a.row_iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                        acc += w[j] * v;
                    }
                    out[i] = acc;
                }
                out
            }
        }
    }

    pub fn tr_mul_c(&self, w: &DVector<C64>) -> DVector<C64> {
        match self {
            StateMatrix::Dense(a) => {
                let re = a.tr_mul(&w.map(|z| z.re));
                let im = a.tr_mul(&w.map(|z| z.im));
                DVector::from_fn(re.len(), |i, _| C64::new(re[i], im[i]))
            }
            StateMatrix::Sparse(a) => {
                let mut out = DVector::zeros(a.ncols());
                for (i, row) in a.row_iter().enumerate() {
                    let wi = w[i];
                    for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                        out[j] += wi * v;
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            StateMatrix::Dense(a) => a.clone(),
            StateMatrix::Sparse(a) => {
                let mut d = DMatrix::zeros(a.nrows(), a.ncols());
                for (i, j, &v) in a.triplet_iter() {
                    d[(i, j)] += v;
                }
                d
            }
        }
    }

    pub fn fro_norm(&self) -> f64 {
        match self {
            StateMatrix::Dense(a) => a.norm(),
            StateMatrix::Sparse(a) => a.values().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

impl From<DMatrix<f64>> for StateMatrix {
    fn from(a: DMatrix<f64>) -> Self {
        StateMatrix::Dense(a)
    }
}

impl From<CsrMatrix<f64>> for StateMatrix {
    fn from(a: CsrMatrix<f64>) -> Self {
        StateMatrix::Sparse(a)
    }
}

/// Largest singular value of a small-width dense matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let g = if m.nrows() >= m.ncols() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    g.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// `ẋ = Ax + Bw, z = Cx + Dw` (or the discrete-time recurrence).
#[derive(Clone, Debug)]
pub struct StateSpaceSystem {
    a: StateMatrix,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    domain: Domain,
    a_norm: f64,
    b_norm: f64,
    c_norm: f64,
    d_norm: f64,
}

impl StateSpaceSystem {
    /// Checks dimensions only; see [`StateSpaceSystem::check_stable`].
    pub fn new(
        a: impl Into<StateMatrix>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        domain: Domain,
    ) -> Result<Self> {
        let a = a.into();
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}",
                n,
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, A has {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, A has {n}",
                c.ncols()
            )));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(StateSpaceSystem {
            a_norm: a.fro_norm(),
            b_norm: spectral_norm(&b),
            c_norm: spectral_norm(&c),
            d_norm: spectral_norm(&d),
            a,
            b,
            c,
            d,
            domain,
        })
    }

    /// Scalar system `(a, b, c, d)`.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64, domain: Domain) -> Self {
        let m = |x| DMatrix::from_element(1, 1, x);
        StateSpaceSystem::new(m(a), m(b), m(c), m(d), domain).expect("1x1 system is consistent")
    }

    pub fn a(&self) -> &StateMatrix {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Number of inputs (columns of `B`).
    pub fn p(&self) -> usize {
        self.b.ncols()
    }
    /// Number of outputs (rows of `C`).
    pub fn m(&self) -> usize {
        self.c.nrows()
    }
    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }
    pub fn b_norm(&self) -> f64 {
        self.b_norm
    }
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }
    pub fn d_norm(&self) -> f64 {
        self.d_norm
    }

    /// `‖D‖₂⁻¹`, infinite when `D = 0`.
    pub fn cap(&self) -> f64 {
        if self.d_norm == 0.0 {
            f64::INFINITY
        } else {
            self.d_norm.recip()
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn check_eps(&self, eps: f64) -> Result<()> {
        if !(eps >= 0.0 && eps.is_finite() && eps * self.d_norm < 1.0) {
            return Err(Error::InvalidEpsilon {
                eps,
                cap: self.cap(),
            });
        }
        Ok(())
    }

    /// Extremal eigentriple of `A`; `UnstableA` unless it lies strictly inside the stable region.
    pub fn check_stable(&self, cfg: &EigConfig) -> Result<Eigentriple> {
        let op = self.unperturbed();
        let e = extremal_eigentriple(&op, self.domain.extremal(), None, false, cfg)?;
        if self.domain.measure(e.lambda) >= 0.0 {
            return Err(Error::UnstableA(e.lambda));
        }
        Ok(e)
    }

    /// `A` itself as an operator.
    pub fn unperturbed(&self) -> PerturbedOperator<'_> {
        PerturbedOperator {
            a: &self.a,
            bu: DMatrix::zeros(self.n(), 0),
            vc: DMatrix::zeros(0, self.n()),
            real: true,
            norm: self.a_norm,
        }
    }

    fn b_c(&self) -> DMatrix<C64> {
        self.b.map(|x| C64::new(x, 0.0))
    }

    /// `Bᵀw` for a complex state vector.
    pub fn bt_mul(&self, w: &DVector<C64>) -> DVector<C64> {
        self.b_c().tr_mul(w)
    }

    /// `Cw` for a complex state vector.
    pub fn c_mul(&self, w: &DVector<C64>) -> DVector<C64> {
        self.c.map(|x| C64::new(x, 0.0)) * w
    }
}

/// `M(εUVᴴ)` applied through the rank-r correction `(εBU)K(VᴴC)` with `K = (I − εVᴴDU)⁻¹`.
#[derive(Clone, Debug)]
pub struct PerturbedOperator<'a> {
    a: &'a StateMatrix,
    bu: DMatrix<C64>,
    vc: DMatrix<C64>,
    real: bool,
    norm: f64,
}

impl PerturbedOperator<'_> {
    /// The n×r and r×n factors of the low-rank correction.
    pub fn correction(&self) -> (&DMatrix<C64>, &DMatrix<C64>) {
        (&self.bu, &self.vc)
    }
}

impl LinearOperator for PerturbedOperator<'_> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn apply(&self, w: &DVector<C64>) -> DVector<C64> {
        let mut out = self.a.mul_c(w);
        if self.bu.ncols() > 0 {
            out += &self.bu * (&self.vc * w);
        }
        out
    }
    fn apply_transpose(&self, w: &DVector<C64>) -> DVector<C64> {
        let mut out = self.a.tr_mul_c(w);
        if self.bu.ncols() > 0 {
            out += self.vc.tr_mul(&self.bu.tr_mul(w));
        }
        out
    }
    fn is_real(&self) -> bool {
        self.real
    }
    fn norm_est(&self) -> f64 {
        self.norm
    }
    fn to_dense(&self) -> DMatrix<C64> {
        let mut m = self.a.to_dense().map(|x| C64::new(x, 0.0));
        if self.bu.ncols() > 0 {
            m += &self.bu * &self.vc;
        }
        m
    }
}

/// Low-rank form of the two inverses `(I − εUVᴴD)⁻¹` and `(I − εDUVᴴ)⁻¹`.
#[derive(Clone, Debug)]
pub struct SmwFactors<T: Field> {
    /// `K = (I − εVᴴDU)⁻¹`.
    pub core_inv: DMatrix<T>,
    eps: T,
    u: DMatrix<T>,
    vh: DMatrix<T>,
    du: DMatrix<T>,
    vh_d: DMatrix<T>,
}

pub fn smw_factors<T: Field>(
    u: &DMatrix<T>,
    v: &DMatrix<T>,
    d: &DMatrix<f64>,
    eps: f64,
) -> Result<SmwFactors<T>> {
    let d_t: DMatrix<T> = lift(d);
    let vh = v.adjoint();
    let du = &d_t * u;
    let vh_d = &vh * &d_t;
    let r = u.ncols();
    let core = DMatrix::<T>::identity(r, r) - (&vh * &du) * T::from_real(eps);
    let core_inv = core.try_inverse().ok_or(Error::SingularCore)?;
    if core_inv.iter().any(|z| !z.to_c64().is_finite()) {
        return Err(Error::SingularCore);
    }
    Ok(SmwFactors {
        core_inv,
        eps: T::from_real(eps),
        u: u.clone(),
        vh,
        du,
        vh_d,
    })
}

impl<T: Field> SmwFactors<T> {
    /// `(I − εUVᴴD)⁻¹ z = z + εUK(VᴴDz)`.
    pub fn input_inverse(&self, z: &DMatrix<T>) -> DMatrix<T> {
        z + &self.u * (&self.core_inv * (&self.vh_d * z)) * self.eps
    }

    /// `(I − εUVᴴD)⁻ᴴ z`.
    pub fn input_inverse_adjoint(&self, z: &DMatrix<T>) -> DMatrix<T> {
        z + self.vh_d.adjoint()
            * (self.core_inv.adjoint() * self.u.ad_mul(z))
            * self.eps.conjugate()
    }

    /// `(I − εDUVᴴ)⁻¹ z = z + εDUK(Vᴴz)`.
    pub fn output_inverse(&self, z: &DMatrix<T>) -> DMatrix<T> {
        z + &self.du * (&self.core_inv * (&self.vh * z)) * self.eps
    }

    /// Explicit p×p matrix `(I − εUVᴴD)⁻¹`, for checking.
    pub fn dense_input_inverse(&self) -> DMatrix<T> {
        let p = self.u.nrows();
        self.input_inverse(&DMatrix::identity(p, p))
    }

    /// Explicit m×m matrix `(I − εDUVᴴ)⁻¹`, for checking.
    pub fn dense_output_inverse(&self) -> DMatrix<T> {
        let m = self.du.nrows();
        self.output_inverse(&DMatrix::identity(m, m))
    }
}

/// `M(εUVᴴ)` as an implicit operator.
pub fn perturbed_operator<'a, T: Field>(
    sys: &'a StateSpaceSystem,
    pert: &Perturbation<T>,
    eps: f64,
) -> Result<PerturbedOperator<'a>> {
    sys.check_eps(eps)?;
    if pert.p() != sys.p() || pert.m() != sys.m() {
        return Err(Error::DimensionMismatch(format!(
            "perturbation is {}x{}, system expects {}x{}",
            pert.p(),
            pert.m(),
            sys.m(),
            sys.p()
        )));
    }
    if eps == 0.0 {
        return Ok(sys.unperturbed());
    }
    let smw = smw_factors(&pert.u, &pert.v, &sys.d, eps)?;
    let buk = sys.b_c() * to_c64(&(&pert.u * &smw.core_inv)) * C64::new(eps, 0.0);
    let vc = to_c64(&pert.v.adjoint()) * sys.c.map(|x| C64::new(x, 0.0));
    let norm = sys.a_norm + buk.norm() * vc.norm();
    Ok(PerturbedOperator {
        a: &sys.a,
        bu: buk,
        vc,
        real: T::REAL,
        norm,
    })
}

/// `G(s) = C(sI − A)⁻¹B + D` by a dense complex LU.
pub fn transfer_eval(sys: &StateSpaceSystem, s: C64) -> Result<DMatrix<C64>> {
    let n = sys.n();
    let mut shifted = sys.a.to_dense().map(|x| C64::new(-x, 0.0));
    for i in 0..n {
        shifted[(i, i)] += s;
    }
    let scale = shifted.norm().max(f64::MIN_POSITIVE);
    let lu = shifted.lu();
    let pivot_min = lu
        .u()
        .diagonal()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    if pivot_min <= 1e-14 * scale {
        return Err(Error::SingularShift(s));
    }
    let x = lu.solve(&sys.b_c()).ok_or(Error::SingularShift(s))?;
    Ok(sys.c.map(|v| C64::new(v, 0.0)) * x + sys.d.map(|v| C64::new(v, 0.0)))
}
