use nalgebra::Complex;

type Complex64 = Complex<f64>;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigensolver did not converge: {0}")]
    NonConvergence(String),
    #[error("extremal eigenvalue is not unique: {a} and {b} tie")]
    AmbiguousExtremal { a: Complex64, b: Complex64 },
    #[error("eigenvalue {lambda} is ill-conditioned (|y*x| = {yx:e})")]
    IllConditionedEigenvalue { lambda: Complex64, yx: f64 },
    #[error("eps = {eps} violates eps * ||D||_2 < 1 (cap {cap})")]
    InvalidEpsilon { eps: f64, cap: f64 },
    #[error("core matrix I - eps V^H D U is singular")]
    SingularCore,
    #[error("sI - A is singular at s = {0}")]
    SingularShift(Complex64),
    #[error("static point: ||Re(uv*)||_F = {0:e}")]
    StaticPoint(f64),
    #[error("path derivative vanishes")]
    DerivativeZero,
    #[error("line search failed after {0} halvings")]
    LineSearchFailed(usize),
    #[error("A is not stable: extremal eigenvalue {0}")]
    UnstableA(Complex64),
    #[error("initial perturbation is not destabilizing (measure {0:e})")]
    InitialNotDestabilizing(f64),
    #[error("rightmost mode gives a zero ascent direction")]
    ZeroDirection,
    #[error("eps reached the cap {cap} without destabilizing")]
    CapExhausted { cap: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
