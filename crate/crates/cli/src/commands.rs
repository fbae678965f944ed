//! The `solve`, `sample`, `oracle` and `batch` verbs as library calls.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stabrad::oracle::{complex_grid, mu_eckart, siso_grid};
use stabrad::sample::{sample_point_cloud, SampleCounts, SamplePoint};
use stabrad::svsa::expand_recording;
use stabrad::{
    solve, starting_points, Evaluator, HecConfig, Mode, Perturbation, StateSpaceSystem, C64,
};

use crate::error::{CliError, Result};
use crate::output::write_atomic;
use crate::problem::{load_problem, settings, ProblemSpec, Settings, SolverFlags};
use crate::record::{ResultRecord, ORACLE_SCHEMA, POINTS_SCHEMA, RESULT_SCHEMA, RNG_NAME};

/// Solves an already loaded system.
pub fn solve_system(
    sys: &StateSpaceSystem,
    settings: &Settings,
    problem: Option<String>,
) -> Result<ResultRecord> {
    let t = Instant::now();
    Ok(match settings.mode {
        Mode::RealFro => {
            let r = solve::<f64>(sys, &settings.cfg)?;
            ResultRecord::new(&r, settings, problem, t.elapsed().as_secs_f64())
        }
        Mode::Complex => {
            let r = solve::<C64>(sys, &settings.cfg)?;
            ResultRecord::new(&r, settings, problem, t.elapsed().as_secs_f64())
        }
    })
}

pub fn run_solve(spec_path: &Path, flags: &SolverFlags) -> Result<ResultRecord> {
    let spec = ProblemSpec::read(spec_path)?;
    let settings = settings(&spec, flags)?;
    let sys = load_problem(&spec, &settings)?;
    solve_system(&sys, &settings, Some(spec_path.display().to_string()))
}

/// Point cloud at `eps`. Perturbed samples are drawn around the iterates of
/// one expansion phase at `eps` started from the rightmost mode of `A`.
pub fn sample_system(
    sys: &StateSpaceSystem,
    eps: f64,
    counts: SampleCounts,
    seed: u64,
) -> Result<Vec<SamplePoint>> {
    sys.check_eps(eps)?;
    let mut base: Vec<Perturbation<f64>> = Vec::new();
    if counts.perturbed > 0 {
        let cfg = HecConfig {
            seed,
            ..HecConfig::default()
        };
        let mut ev = Evaluator::new(sys, cfg.eig.clone());
        if let Some((pert, _)) = starting_points::<f64>(&mut ev, &cfg)?.into_iter().next() {
            let eig = ev.right(&pert, eps)?;
            let out = expand_recording(&mut ev, eps, pert.clone(), eig, &cfg, true)?;
            base = out.iterates;
            if base.is_empty() {
                base.push(pert);
            }
        }
    }
    Ok(sample_point_cloud(sys, eps, counts, seed, &base)?)
}

pub fn points_csv(points: &[SamplePoint], eps: f64, seed: u64) -> Result<Vec<u8>> {
    let mut buf = format!(
        "# schema={POINTS_SCHEMA} eps={eps:.16e} seed={seed} rng={RNG_NAME} sobol=owen-scrambled\n"
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["re", "im", "source"])
            .map_err(|e| CliError::Io(e.into()))?;
        for p in points {
            w.write_record([
                format!("{:.16e}", p.re),
                format!("{:.16e}", p.im),
                p.source.to_string(),
            ])
            .map_err(|e| CliError::Io(e.into()))?;
        }
        w.flush()?;
    }
    Ok(buf)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    SisoGrid,
    ComplexGrid,
    MuEckart,
}

/// Oracle output; infinite values are written as `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub schema: String,
    pub kind: OracleKind,
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default)]
    pub grid_too_coarse: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_fro: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_spec: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_residual: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl OracleRecord {
    fn empty(kind: OracleKind) -> Self {
        OracleRecord {
            schema: ORACLE_SCHEMA.into(),
            kind,
            radius: None,
            omega: None,
            grid_too_coarse: false,
            mu: None,
            delta: None,
            delta_fro: None,
            delta_spec: None,
            det_residual: None,
        }
    }
}

pub fn grid_oracle(sys: &StateSpaceSystem, kind: OracleKind) -> Result<OracleRecord> {
    let o = match kind {
        OracleKind::SisoGrid => siso_grid(sys)?,
        OracleKind::ComplexGrid => complex_grid(sys)?,
        OracleKind::MuEckart => {
            return Err(CliError::Spec("mu-eckart takes a matrix, not a system".into()))
        }
    };
    Ok(OracleRecord {
        radius: finite(o.radius),
        omega: o.omega,
        grid_too_coarse: o.grid_too_coarse,
        ..OracleRecord::empty(kind)
    })
}

pub fn mu_oracle(h: &DMatrix<f64>) -> OracleRecord {
    let r = mu_eckart(h);
    OracleRecord {
        radius: finite(1.0 / r.mu),
        mu: Some(r.mu),
        delta: r.delta.map(|d| {
            d.row_iter()
                .map(|row| row.iter().copied().collect())
                .collect()
        }),
        delta_fro: finite(r.delta_fro),
        delta_spec: finite(r.delta_spec),
        det_residual: finite(r.det_residual),
        ..OracleRecord::empty(OracleKind::MuEckart)
    }
}

/// Written in place of a result when a batch problem fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub schema: String,
    pub problem: String,
    pub error: String,
    pub exit_code: i32,
}

/// Spec files named on the command line; directories contribute their `*.json` files.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Thread cap from `STABRAD_THREADS`; unset or invalid means no cap.
pub fn thread_cap() -> Option<usize> {
    std::env::var("STABRAD_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

#[derive(Clone, Debug)]
pub struct BatchItem {
    pub spec: PathBuf,
    pub output: PathBuf,
    pub exit_code: i32,
}

/// Solves every spec in parallel, writing `<out_dir>/<stem>.json` for each.
/// The batch exit code is the largest of the individual ones.
pub fn run_batch(
    specs: &[PathBuf],
    flags: &SolverFlags,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<(Vec<BatchItem>, i32)> {
    std::fs::create_dir_all(out_dir)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Spec(format!("thread pool: {e}")))?;
    let items: Vec<Result<BatchItem>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let stem = spec
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "problem".into());
                let output = out_dir.join(format!("{stem}.json"));
                let (bytes, exit_code) = match run_solve(spec, flags) {
                    Ok(rec) => (rec.to_json(), rec.exit_code),
                    Err(e) => {
                        let rec = ErrorRecord {
                            schema: RESULT_SCHEMA.into(),
                            problem: spec.display().to_string(),
                            error: e.to_string(),
                            exit_code: e.exit_code(),
                        };
                        let mut s = serde_json::to_string_pretty(&rec).expect("records serialize");
                        s.push('\n');
                        (s, rec.exit_code)
                    }
                };
                write_atomic(&output, bytes.as_bytes())?;
                Ok(BatchItem {
                    spec: spec.clone(),
                    output,
                    exit_code,
                })
            })
            .collect()
    });
    let items = items.into_iter().collect::<Result<Vec<_>>>()?;
    let code = items.iter().map(|i| i.exit_code).max().unwrap_or(0);
    Ok((items, code))
}
