//! Problem specifications and the flags that override them.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use stabrad::{Domain, HecConfig, Mode, StateSpaceSystem};

use crate::error::{CliError, Result};
use crate::mm;

pub const PROBLEM_SCHEMA: &str = "stabrad.problem/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TimeArg {
    Continuous,
    Discrete,
}

impl From<TimeArg> for Domain {
    fn from(t: TimeArg) -> Domain {
        match t {
            TimeArg::Continuous => Domain::Continuous,
            TimeArg::Discrete => Domain::Discrete,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    RealFro,
    Complex,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::RealFro => Mode::RealFro,
            ModeArg::Complex => Mode::Complex,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(x: OnOff) -> bool {
        x == OnOff::On
    }
}

/// Solver settings a spec file may override; absent fields keep the defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub tol_eps: Option<f64>,
    pub tol_uv: Option<f64>,
    pub accel: Option<bool>,
    pub early: Option<bool>,
    pub maxit_outer: Option<usize>,
    pub maxit_expand: Option<usize>,
    pub maxit_contract: Option<usize>,
    pub starts: Option<usize>,
    pub ray_starts: Option<bool>,
}

/// JSON problem file. Matrix paths are relative to the file itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub schema: Option<String>,
    pub a: PathBuf,
    #[serde(default)]
    pub b: Option<PathBuf>,
    #[serde(default)]
    pub c: Option<PathBuf>,
    #[serde(default)]
    pub d: Option<PathBuf>,
    #[serde(default)]
    pub time: Option<TimeArg>,
    #[serde(default)]
    pub mode: Option<ModeArg>,
    #[serde(default)]
    pub config: ConfigOverrides,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ProblemSpec {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let mut spec: ProblemSpec = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        if let Some(s) = &spec.schema {
            if s != PROBLEM_SCHEMA {
                return Err(CliError::Spec(format!("unsupported schema {s}")));
            }
        }
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// Reads the matrices. `B` and `C` default to the identity, `D` to zero.
    pub fn system(&self, domain: Domain) -> Result<StateSpaceSystem> {
        let a = mm::read_state_matrix(&self.resolve(&self.a))?;
        let n = a.nrows();
        let read = |p: &Option<PathBuf>| -> Result<Option<DMatrix<f64>>> {
            p.as_ref().map(|p| mm::read_dense(&self.resolve(p))).transpose()
        };
        let b = read(&self.b)?.unwrap_or_else(|| DMatrix::identity(n, n));
        let c = read(&self.c)?.unwrap_or_else(|| DMatrix::identity(n, n));
        let d = read(&self.d)?.unwrap_or_else(|| DMatrix::zeros(c.nrows(), b.ncols()));
        Ok(StateSpaceSystem::new(a, b, c, d, domain)?)
    }
}

/// Flags shared by `solve` and `batch`; each one beats the spec file.
#[derive(Args, Clone, Debug, Default)]
pub struct SolverFlags {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub time: Option<TimeArg>,
    #[arg(long)]
    pub tol_eps: Option<f64>,
    #[arg(long)]
    pub tol_uv: Option<f64>,
    #[arg(long, value_enum)]
    pub accel: Option<OnOff>,
    #[arg(long, value_enum)]
    pub early: Option<OnOff>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Everything a solve needs besides the matrices.
#[derive(Clone, Debug)]
pub struct Settings {
    pub domain: Domain,
    pub mode: Mode,
    pub seed: u64,
    pub cfg: HecConfig,
}

pub fn settings(spec: &ProblemSpec, flags: &SolverFlags) -> Result<Settings> {
    let o = &spec.config;
    let d = HecConfig::default();
    let mode: Mode = flags.mode.or(spec.mode).unwrap_or(ModeArg::RealFro).into();
    let seed = flags.seed.or(spec.seed).unwrap_or(0);
    let cfg = HecConfig {
        tau_eps: flags.tol_eps.or(o.tol_eps).unwrap_or(d.tau_eps),
        tau_uv: flags.tol_uv.or(o.tol_uv).unwrap_or(d.tau_uv),
        accel: flags.accel.map(bool::from).or(o.accel).unwrap_or(d.accel),
        early: flags.early.map(bool::from).or(o.early).unwrap_or(d.early),
        maxit_outer: o.maxit_outer.unwrap_or(d.maxit_outer),
        maxit_expand: o.maxit_expand.unwrap_or(d.maxit_expand),
        maxit_contract: o.maxit_contract.unwrap_or(d.maxit_contract),
        starts: o.starts.unwrap_or(d.starts),
        ray_starts: o.ray_starts.unwrap_or(d.ray_starts),
        mode,
        seed,
        ..d
    };
    cfg.validate()?;
    Ok(Settings {
        domain: flags.time.or(spec.time).unwrap_or(TimeArg::Continuous).into(),
        mode,
        seed,
        cfg,
    })
}

/// Reads the system and checks that `A` is stable.
pub fn load_problem(spec: &ProblemSpec, settings: &Settings) -> Result<StateSpaceSystem> {
    let sys = spec.system(settings.domain)?;
    sys.check_stable(&settings.cfg.eig)?;
    Ok(sys)
}
