//! Command-line front end: instance generation, single solves, experiments
//! and plots.
//!
//! Exit codes: 0 success, 1 partial failure (see the manifest), 2 invalid
//! configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use stochminimax::experiments::{
    initial_point, run_exp1, run_exp2, ExperimentKind, ExperimentSpec, Pairing, RunConfig, RunSeeds,
};
use stochminimax::plot::emit_plot;
use stochminimax::{run_ippgda, Error, RunStatus, SaaProblem};

#[derive(Parser)]
#[command(version, about = "Two-stage stochastic minimax solver and experiments")]
struct Cli {
    /// TOML file with [dims], [instance], [solver] and [experiment] sections
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides experiment.master_seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides experiment.output_dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance with its scenarios and write problem.json
    Gen {
        #[arg(long)]
        tau: Option<f64>,
        /// Sample size N
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run IPPGDA on one problem and write trace.csv
    Solve {
        /// Problem JSON from `gen`; generated from the config when absent
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Experiment 1: residual traces over τ, instances and initial points
    Exp1 {
        /// Run every instance from every initial point
        #[arg(long)]
        cross: bool,
    },
    /// Experiment 2: SAA convergence over sample sizes and boxes
    Exp2 {
        /// Full scale (N up to 3000, 30 instances) instead of desk scale
        #[arg(long)]
        full: bool,
    },
    /// Render a trace or Experiment 2 CSV as SVG
    Plot {
        csv: PathBuf,
        /// Defaults to the CSV path with an .svg extension
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidDims(_) => Failure::Config(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(cli: &Cli, kind: ExperimentKind) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml_str_with(&text, default_spec(kind))?
        }
        None => RunConfig {
            experiment: default_spec(kind),
            ..Default::default()
        },
    };
    cfg.experiment.kind = kind;
    if let Some(seed) = cli.seed {
        cfg.experiment.master_seed = seed;
        cfg.solver.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.experiment.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_spec(kind: ExperimentKind) -> ExperimentSpec {
    match kind {
        ExperimentKind::Exp2 => ExperimentSpec::exp2_desk(),
        _ => ExperimentSpec {
            kind,
            ..ExperimentSpec::exp1()
        },
    }
}

#[derive(Serialize)]
struct SolveMetadata<'a> {
    problem: Option<&'a Path>,
    master_seed: u64,
    seeds: RunSeeds,
    config: &'a RunConfig,
    status: RunStatus,
    iterations: usize,
    final_resval: f64,
    x1: &'a [f64],
    y1: &'a [f64],
    beta_x: f64,
    beta_y: f64,
    seconds: f64,
}

fn apply_overrides(cfg: &mut RunConfig, tau: Option<f64>, n: Option<usize>) -> Result<(), Failure> {
    if let Some(t) = tau {
        cfg.instance.tau = t;
    }
    if let Some(n) = n {
        cfg.instance.n = n;
    }
    cfg.validate()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Gen { tau, n } => {
            let mut cfg = load_config(cli, ExperimentKind::Single)?;
            apply_overrides(&mut cfg, *tau, *n)?;
            let prob = cfg.single_problem(cfg.experiment.master_seed)?;
            std::fs::create_dir_all(&cfg.experiment.output_dir)?;
            let path = cfg.experiment.output_dir.join("problem.json");
            std::fs::write(&path, prob.to_json()? + "\n")?;
            println!(
                "wrote {} (N = {}, resampled scenarios = {})",
                path.display(),
                prob.n(),
                prob.resampled_count()
            );
            Ok(true)
        }
        Command::Solve { problem, tau, n } => {
            let mut cfg = load_config(cli, ExperimentKind::Single)?;
            apply_overrides(&mut cfg, *tau, *n)?;
            let master = cfg.experiment.master_seed;
            let prob = match problem {
                Some(path) => SaaProblem::from_json(&std::fs::read_to_string(path)?)?,
                None => cfg.single_problem(master)?,
            };
            let seeds = RunSeeds::derive(master, 0, 0, 0);
            let bounds = (prob.instance.lb, prob.instance.ub);
            let (x0, y0) = initial_point(seeds.init, prob.instance.dims, bounds);
            let start = Instant::now();
            let trace = run_ippgda(&prob, &x0, &y0, &cfg.solver)?;
            let seconds = start.elapsed().as_secs_f64();
            let dir = &cfg.experiment.output_dir;
            std::fs::create_dir_all(dir)?;
            trace.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?))?;
            let last = trace.last();
            let meta = SolveMetadata {
                problem: problem.as_deref(),
                master_seed: master,
                seeds,
                config: &cfg,
                status: trace.status,
                iterations: last.k,
                final_resval: last.resval,
                x1: &trace.x1,
                y1: &trace.y1,
                beta_x: trace.beta_x,
                beta_y: trace.beta_y,
                seconds,
            };
            let meta_json = serde_json::to_string_pretty(&meta).map_err(Error::from)?;
            std::fs::write(dir.join("trace_meta.json"), meta_json + "\n")?;
            println!(
                "{:?} after {} iterations, Res.val = {:e}, objective = {:e}",
                trace.status, last.k, last.resval, last.objective
            );
            Ok(trace.status == RunStatus::Converged)
        }
        Command::Exp1 { cross } => {
            let mut cfg = load_config(cli, ExperimentKind::Exp1)?;
            if *cross {
                cfg.experiment.pairing = Pairing::Cross;
            }
            let out = run_exp1(&cfg)?;
            report(out.manifest.runs.len(), out.manifest.failures(), &out.dir);
            Ok(out.manifest.failures() == 0)
        }
        Command::Exp2 { full } => {
            let mut cfg = load_config(cli, ExperimentKind::Exp2)?;
            if *full {
                let spec = ExperimentSpec::exp2();
                cfg.experiment.n_values = spec.n_values;
                cfg.experiment.num_instances = spec.num_instances;
            }
            let out = run_exp2(&cfg)?;
            let m = &out.experiment.manifest;
            report(m.runs.len(), m.failures(), &out.experiment.dir);
            Ok(m.failures() == 0)
        }
        Command::Plot { csv, output } => {
            let out = output.clone().unwrap_or_else(|| csv.with_extension("svg"));
            emit_plot(csv, &out)?;
            println!("wrote {}", out.display());
            Ok(true)
        }
    }
}

fn report(runs: usize, failures: usize, dir: &Path) {
    println!(
        "{runs} runs, {failures} not converged; manifest at {}",
        dir.join("manifest.json").display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
