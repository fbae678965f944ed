use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stabrad::sample::SampleCounts;
use stabrad_cli::commands::{
    expand_inputs, grid_oracle, mu_oracle, points_csv, run_batch, run_solve, sample_system,
    thread_cap, OracleKind,
};
use stabrad_cli::mm::read_dense;
use stabrad_cli::output::emit;
use stabrad_cli::problem::{load_problem, settings, ProblemSpec, SolverFlags, TimeArg};
use stabrad_cli::{CliError, Result};

/// Stability radius approximation by hybrid expansion-contraction.
#[derive(Parser)]
#[command(name = "stabrad", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Approximate the stability radius of one problem.
    Solve {
        spec: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues of randomly perturbed systems as CSV.
    Sample(SampleArgs),
    /// Reference values for small problems.
    Oracle {
        /// Problem spec (siso-grid, complex-grid).
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// Matrix Market file holding H (mu-eckart).
        #[arg(long)]
        h: Option<PathBuf>,
        #[arg(long, value_enum)]
        time: Option<TimeArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve many problems in parallel, one result file each.
    Batch {
        /// Spec files or directories of them.
        #[arg(required = true)]
        specs: Vec<PathBuf>,
        #[command(flatten)]
        flags: SolverFlags,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SampleArgs {
    spec: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1000)]
    randn: usize,
    #[arg(long, default_value_t = 1000)]
    sobol: usize,
    #[arg(long, default_value_t = 1000)]
    perturbed: usize,
    #[arg(long, value_enum)]
    time: Option<TimeArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Solve { spec, flags, out } => {
            let rec = run_solve(&spec, &flags)?;
            emit(out.as_deref(), rec.to_json().as_bytes())?;
            eprintln!(
                "{}: eps = {:.12e} ({})",
                spec.display(),
                rec.eps_final,
                rec.status
            );
            Ok(rec.exit_code)
        }
        Cmd::Sample(a) => {
            let spec = ProblemSpec::read(&a.spec)?;
            let flags = SolverFlags {
                time: a.time,
                seed: a.seed,
                ..SolverFlags::default()
            };
            let st = settings(&spec, &flags)?;
            let sys = load_problem(&spec, &st)?;
            let counts = SampleCounts {
                randn: a.randn,
                sobol: a.sobol,
                perturbed: a.perturbed,
            };
            let pts = sample_system(&sys, a.eps, counts, st.seed)?;
            emit(a.out.as_deref(), &points_csv(&pts, a.eps, st.seed)?)?;
            Ok(0)
        }
        Cmd::Oracle {
            spec,
            kind,
            h,
            time,
            out,
        } => {
            let rec = if kind == OracleKind::MuEckart {
                let h = h.ok_or_else(|| CliError::Spec("mu-eckart needs --h".into()))?;
                mu_oracle(&read_dense(&h)?)
            } else {
                let path = spec.ok_or_else(|| CliError::Spec("grid oracles need a spec".into()))?;
                let spec = ProblemSpec::read(&path)?;
                let flags = SolverFlags {
                    time,
                    ..SolverFlags::default()
                };
                let st = settings(&spec, &flags)?;
                let sys = load_problem(&spec, &st)?;
                grid_oracle(&sys, kind)?
            };
            if rec.grid_too_coarse {
                eprintln!("warning: grid too coarse, answer moved by more than 1e-8 on refinement");
            }
            let mut s = serde_json::to_string_pretty(&rec).expect("records serialize");
            s.push('\n');
            emit(out.as_deref(), s.as_bytes())?;
            Ok(0)
        }
        Cmd::Batch { specs, flags, out } => {
            let specs = expand_inputs(&specs)?;
            let (items, code) = run_batch(&specs, &flags, &out, thread_cap())?;
            for it in &items {
                eprintln!("{} -> {} (exit {})", it.spec.display(), it.output.display(), it.exit_code);
            }
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
