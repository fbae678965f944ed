//! Result records: what a solve found, how, and a certificate to re-check it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use stabrad::{g_uv, EigConfig, Field, HecResult, Perturbation, StateSpaceSystem, Status, C64};

use crate::error::{CliError, Result};
use crate::problem::{ModeArg, Settings, TimeArg};

pub const RESULT_SCHEMA: &str = "stabrad.result/1";
pub const ORACLE_SCHEMA: &str = "stabrad.oracle/1";
pub const POINTS_SCHEMA: &str = "stabrad.points/1";
pub const RNG_NAME: &str = "ChaCha8";

/// Exit code for a solve outcome.
pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::ConvergedToTolerance => 0,
        Status::Stagnated | Status::MaxitOuter => 2,
        Status::CapActive => 3,
    }
}

pub fn status_name(status: Status) -> &'static str {
    match status {
        Status::ConvergedToTolerance => "converged",
        Status::Stagnated => "stagnated",
        Status::MaxitOuter => "maxit",
        Status::CapActive => "cap-active",
    }
}

fn full_precision<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format!("{x:.16e}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Complex { re: z.re, im: z.im }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigSolves {
    pub right: usize,
    pub left: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub mode: ModeArg,
    pub time: TimeArg,
    pub tol_eps: f64,
    pub tol_uv: f64,
    pub accel: bool,
    pub early: bool,
    pub maxit_outer: usize,
    pub starts: usize,
    pub ray_starts: bool,
}

/// Column-major matrix; `im` is absent for real data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl MatrixData {
    pub fn from_field<T: Field>(m: &DMatrix<T>) -> Self {
        let z: Vec<C64> = m.iter().map(|x| x.to_c64()).collect();
        MatrixData {
            rows: m.nrows(),
            cols: m.ncols(),
            re: z.iter().map(|x| x.re).collect(),
            im: (!T::REAL).then(|| z.iter().map(|x| x.im).collect()),
        }
    }

    pub fn to_field<T: Field>(&self) -> Result<DMatrix<T>> {
        let n = self.rows * self.cols;
        let bad = || CliError::Spec("certificate matrix has the wrong size".into());
        if self.re.len() != n || self.im.as_ref().is_some_and(|im| im.len() != n) {
            return Err(bad());
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = j * self.rows + i;
            let im = self.im.as_ref().map_or(0.0, |v| v[k]);
            T::from_c64(C64::new(self.re[k], im))
        }))
    }
}

/// `E = UVᴴ` at `eps_final`; `Δ = eps_final·E`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub u: MatrixData,
    pub v: MatrixData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema: String,
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(serialize_with = "full_precision")]
    pub eps_final: f64,
    pub lambda_final: Complex,
    pub status: String,
    pub exit_code: i32,
    pub iters: usize,
    pub eig_solves: EigSolves,
    pub wall_time_s: f64,
    pub config: ConfigEcho,
    pub seed: u64,
    pub rng: String,
    pub certificate: Certificate,
}

impl ResultRecord {
    pub fn new<T: Field>(
        res: &HecResult<T>,
        settings: &Settings,
        problem: Option<String>,
        wall_time_s: f64,
    ) -> Self {
        let cfg = &settings.cfg;
        ResultRecord {
            schema: RESULT_SCHEMA.into(),
            problem,
            eps_final: res.eps_final,
            lambda_final: res.lambda_final.into(),
            status: status_name(res.status).into(),
            exit_code: exit_code(res.status),
            iters: res.outer_iters,
            eig_solves: EigSolves {
                right: res.stats.right,
                left: res.stats.left,
                total: res.stats.total(),
            },
            wall_time_s,
            config: ConfigEcho {
                mode: match settings.mode {
                    stabrad::Mode::RealFro => ModeArg::RealFro,
                    stabrad::Mode::Complex => ModeArg::Complex,
                },
                time: match settings.domain {
                    stabrad::Domain::Continuous => TimeArg::Continuous,
                    stabrad::Domain::Discrete => TimeArg::Discrete,
                },
                tol_eps: cfg.tau_eps,
                tol_uv: cfg.tau_uv,
                accel: cfg.accel,
                early: cfg.early,
                maxit_outer: cfg.maxit_outer,
                starts: cfg.starts,
                ray_starts: cfg.ray_starts,
            },
            seed: settings.seed,
            rng: RNG_NAME.into(),
            certificate: Certificate {
                u: MatrixData::from_field(&res.pert_final.u),
                v: MatrixData::from_field(&res.pert_final.v),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("records serialize");
        s.push('\n');
        s
    }
}

/// Outcome of re-evaluating a certificate.
#[derive(Clone, Copy, Debug)]
pub struct CertificateCheck {
    pub lambda: C64,
    /// `|λ − lambda_final|`.
    pub lambda_error: f64,
    /// Difference between the recomputed and the recorded measure.
    pub measure_error: f64,
}

/// Rebuilds `εE` from the record and recomputes the extremal eigenvalue.
pub fn verify_certificate(
    sys: &StateSpaceSystem,
    rec: &ResultRecord,
    eig: &EigConfig,
) -> Result<CertificateCheck> {
    fn check<T: Field>(
        sys: &StateSpaceSystem,
        rec: &ResultRecord,
        eig: &EigConfig,
    ) -> Result<CertificateCheck> {
        let pert = Perturbation::new(
            rec.certificate.u.to_field::<T>()?,
            rec.certificate.v.to_field::<T>()?,
        )?;
        let (m, e) = g_uv(sys, &pert, rec.eps_final, eig)?;
        let want = C64::new(rec.lambda_final.re, rec.lambda_final.im);
        Ok(CertificateCheck {
            lambda: e.lambda,
            lambda_error: (e.lambda - want).norm(),
            measure_error: (m - sys.domain().measure(want)).abs(),
        })
    }
    if rec.certificate.u.im.is_some() {
        check::<C64>(sys, rec, eig)
    } else {
        check::<f64>(sys, rec, eig)
    }
}
