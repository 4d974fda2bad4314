//! Experiment drivers: TOML run configuration, Experiment 1 residual traces,
//! Experiment 2 SAA sweeps, manifests and metadata sidecars.
//!
//! Seeds are derived from the master seed with [`derive_seed`]:
//!
//! - instance: `(master, TAG_INSTANCE, τ-index, instance)`
//! - scenarios: `(master, TAG_SCENARIO, τ-index, instance)`
//! - initial point: `(master, TAG_INIT_POINT, τ-index, init)`
//!
//! Experiment 2 uses τ-index 0. Every run can be regenerated on its own from
//! the seeds stored in the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::ippgda::{inner_max_from, run_ippgda, IppgdaTrace, RunStatus};
use crate::problem::{generate_instance, sample_scenarios, Dimensions, SaaProblem};
use crate::rng::{derive_seed, UniformStream, TAG_INIT_POINT, TAG_INSTANCE, TAG_SCENARIO};

pub use crate::plot::emit_plot;

pub const EXP2_CSV_HEADER: &str = "box,N,instance,objective_at_final,psi_inner_max";
pub const EXP2_SUMMARY_HEADER: &str = "box,N,count,mean_objective,sd_objective,mean_psi,sd_psi";

/// Initial points: `x₁⁰` uniform on this range (clipped to the box), `y₁⁰` on `[0, 1]`.
const X0_RANGE: (f64, f64) = (7.0, 10.0);
const Y0_RANGE: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Exp1,
    Exp2,
    Single,
}

/// How Experiment 1 combines instances with initial points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Instance `i` runs from initial point `i`.
    Zip,
    /// Every instance runs from every initial point.
    Cross,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub tau_values: Vec<f64>,
    pub n_values: Vec<usize>,
    /// First-stage boxes `(lb, ub)`; Experiment 1 uses the first.
    pub boxes: Vec<(f64, f64)>,
    pub num_instances: usize,
    pub num_initial_points: usize,
    pub pairing: Pairing,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Gradient tolerance of the inner maximization behind `psi_inner_max`.
    pub inner_max_tol: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::exp1()
    }
}

impl ExperimentSpec {
    pub fn exp1() -> Self {
        Self {
            kind: ExperimentKind::Exp1,
            tau_values: vec![0.1, 0.5],
            n_values: vec![50],
            boxes: vec![(-10.0, 10.0)],
            num_instances: 5,
            num_initial_points: 5,
            pairing: Pairing::Zip,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            inner_max_tol: 1e-6,
        }
    }

    /// Full scale: six sample sizes up to 3000, 30 instances per box.
    pub fn exp2() -> Self {
        Self {
            kind: ExperimentKind::Exp2,
            tau_values: vec![0.5],
            n_values: vec![10, 50, 200, 500, 1000, 3000],
            boxes: vec![(-10.0, 10.0), (-20.0, 20.0)],
            num_instances: 30,
            num_initial_points: 1,
            ..Self::exp1()
        }
    }

    /// Desk scale with doubling sample sizes for paired differences.
    pub fn exp2_desk() -> Self {
        Self {
            n_values: vec![10, 25, 50, 100, 200],
            num_instances: 10,
            ..Self::exp2()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.tau_values.is_empty() || self.tau_values.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad(format!("tau_values must be nonempty and positive: {:?}", self.tau_values));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad(format!("n_values must be nonempty and positive: {:?}", self.n_values));
        }
        if self.boxes.is_empty() || self.boxes.iter().any(|(lb, ub)| !(lb < ub)) {
            return bad(format!("boxes must be nonempty with lb < ub: {:?}", self.boxes));
        }
        if self.kind == ExperimentKind::Exp1
            && self.pairing == Pairing::Zip
            && self.num_initial_points < self.num_instances
        {
            return bad(format!(
                "zip pairing needs num_initial_points >= num_instances ({} < {})",
                self.num_initial_points, self.num_instances
            ));
        }
        if !(self.inner_max_tol > 0.0) {
            return bad(format!("inner_max_tol must be positive, got {}", self.inner_max_tol));
        }
        Ok(())
    }
}

/// The `[instance]` section: data for `gen` and `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSettings {
    pub tau: f64,
    pub lb: f64,
    pub ub: f64,
    pub noise_scale: f64,
    /// Sample size `N`.
    pub n: usize,
}

impl Default for InstanceSettings {
    fn default() -> Self {
        Self {
            tau: 0.5,
            lb: -10.0,
            ub: 10.0,
            noise_scale: 0.1,
            n: 50,
        }
    }
}

/// A whole TOML configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dims: Dimensions,
    pub instance: InstanceSettings,
    pub solver: SolverConfig,
    pub experiment: ExperimentSpec,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_str_with(text, ExperimentSpec::default())
    }

    /// Like [`RunConfig::from_toml_str`], but keys missing from
    /// `[experiment]` are taken from `defaults`.
    pub fn from_toml_str_with(text: &str, defaults: ExperimentSpec) -> Result<Self> {
        let config_err = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config_err(&e))?;
        let mut experiment = toml::Table::try_from(&defaults).map_err(|e| config_err(&e))?;
        match table.remove("experiment") {
            Some(toml::Value::Table(given)) => experiment.extend(given),
            Some(other) => return Err(Error::Config(format!("[experiment] must be a table, got {other}"))),
            None => {}
        }
        table.insert("experiment".into(), toml::Value::Table(experiment));
        let cfg: RunConfig = table.try_into().map_err(|e| config_err(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.dims
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let i = &self.instance;
        if !(i.tau > 0.0) || !(i.lb < i.ub) || !(i.noise_scale >= 0.0) || i.n == 0 {
            return Err(Error::Config(format!("invalid [instance] section: {i:?}")));
        }
        self.solver.validate()?;
        self.experiment.validate()
    }

    /// Generates the single problem described by `[dims]` and `[instance]`.
    pub fn single_problem(&self, master_seed: u64) -> Result<SaaProblem> {
        let seeds = RunSeeds::derive(master_seed, 0, 0, 0);
        let i = &self.instance;
        build_problem(self.dims, i.tau, (i.lb, i.ub), i.noise_scale, i.n, &seeds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub instance: u64,
    pub scenario: u64,
    pub init: u64,
}

impl RunSeeds {
    pub fn derive(master: u64, tau_index: usize, instance: usize, init: usize) -> Self {
        let (t, i, p) = (tau_index as u64, instance as u64, init as u64);
        Self {
            instance: derive_seed(master, &[TAG_INSTANCE, t, i]),
            scenario: derive_seed(master, &[TAG_SCENARIO, t, i]),
            init: derive_seed(master, &[TAG_INIT_POINT, t, p]),
        }
    }
}

fn build_problem(
    dims: Dimensions,
    tau: f64,
    (lb, ub): (f64, f64),
    noise_scale: f64,
    n: usize,
    seeds: &RunSeeds,
) -> Result<SaaProblem> {
    let mut inst = generate_instance(dims, tau, lb, ub, seeds.instance)?;
    inst.noise_scale = noise_scale;
    let scenarios = sample_scenarios(&inst, n, seeds.scenario)?;
    SaaProblem::new(inst, scenarios, seeds.scenario)
}

/// `x₁⁰ ~ U[7, 10]^{n1}` clipped to `[lb, ub]`, `y₁⁰ ~ U[0, 1]^{m1}`.
pub fn initial_point(seed: u64, dims: Dimensions, (lb, ub): (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let mut rng = UniformStream::new(seed);
    let x = rng
        .uniform_vec(dims.n1, X0_RANGE.0, X0_RANGE.1)
        .into_iter()
        .map(|v| v.clamp(lb, ub))
        .collect();
    let y = rng.uniform_vec(dims.m1, Y0_RANGE.0, Y0_RANGE.1);
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    Converged,
    MaxIters,
    Error,
}

impl From<RunStatus> for RunOutcome {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Converged => RunOutcome::Converged,
            RunStatus::MaxIters => RunOutcome::MaxIters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub tau: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "box")]
    pub bounds: (f64, f64),
    pub instance: usize,
    pub init: usize,
    pub seeds: RunSeeds,
    pub status: RunOutcome,
    pub iterations: Option<usize>,
    pub final_resval: Option<f64>,
    /// Scenarios that needed at least one redraw because `Q₂` or `S₂` was indefinite.
    pub resampled_scenarios: usize,
    pub rejected_draws: usize,
    pub error: Option<String>,
    /// Output file relative to the experiment directory.
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub dims: Dimensions,
    pub experiment: ExperimentSpec,
    pub solver: SolverConfig,
    pub runs: Vec<RunRecord>,
}

impl Manifest {
    /// Runs that did not converge.
    pub fn failures(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.status != RunOutcome::Converged)
            .count()
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Non-deterministic companion of a manifest or trace: wall-clock timings.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub config: &'a RunConfig,
    pub total_seconds: f64,
    pub run_seconds: Vec<(String, f64)>,
}

impl RunMetadata<'_> {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

fn box_label((lb, ub): (f64, f64)) -> String {
    format!("{lb}:{ub}")
}

struct Launched {
    record: RunRecord,
    seconds: f64,
}

struct RunPlan {
    tau_index: usize,
    tau: f64,
    instance: usize,
    init: usize,
}

fn exp1_plans(spec: &ExperimentSpec) -> Vec<RunPlan> {
    let mut plans = Vec::new();
    for (tau_index, &tau) in spec.tau_values.iter().enumerate() {
        for instance in 0..spec.num_instances {
            let inits: Vec<usize> = match spec.pairing {
                Pairing::Zip => vec![instance],
                Pairing::Cross => (0..spec.num_initial_points).collect(),
            };
            for init in inits {
                plans.push(RunPlan {
                    tau_index,
                    tau,
                    instance,
                    init,
                });
            }
        }
    }
    plans
}

fn error_record(mut record: RunRecord, e: &Error) -> RunRecord {
    record.status = RunOutcome::Error;
    record.error = Some(e.to_string());
    record
}

fn exp1_run(cfg: &RunConfig, plan: &RunPlan, dir: &Path) -> Launched {
    let spec = &cfg.experiment;
    let n = spec.n_values[0];
    let bounds = spec.boxes[0];
    let seeds = RunSeeds::derive(spec.master_seed, plan.tau_index, plan.instance, plan.init);
    let id = format!("tau{}_inst{}_init{}", plan.tau, plan.instance, plan.init);
    let mut record = RunRecord {
        id: id.clone(),
        tau: plan.tau,
        n,
        bounds,
        instance: plan.instance,
        init: plan.init,
        seeds,
        status: RunOutcome::Error,
        iterations: None,
        final_resval: None,
        resampled_scenarios: 0,
        rejected_draws: 0,
        error: None,
        output: None,
    };
    let start = Instant::now();
    let outcome = (|| -> Result<IppgdaTrace> {
        let prob = build_problem(cfg.dims, plan.tau, bounds, cfg.instance.noise_scale, n, &seeds)?;
        record.resampled_scenarios = prob.resampled_count();
        record.rejected_draws = prob.scenarios.iter().map(|s| s.rejected_draws).sum();
        let (x0, y0) = initial_point(seeds.init, cfg.dims, bounds);
        run_ippgda(&prob, &x0, &y0, &cfg.solver)
    })();
    let record = match outcome {
        Ok(trace) => {
            let file = format!("{id}.csv");
            match fs::File::create(dir.join(&file)).map_err(Error::from).and_then(|f| {
                trace.write_csv(std::io::BufWriter::new(f))
            }) {
                Ok(()) => RunRecord {
                    status: trace.status.into(),
                    iterations: Some(trace.last().k),
                    final_resval: Some(trace.last().resval),
                    output: Some(file),
                    ..record
                },
                Err(e) => error_record(record, &e),
            }
        }
        Err(e) => error_record(record, &e),
    };
    Launched {
        record,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Result of an experiment: the manifest (also on disk) and per-run timings.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub manifest: Manifest,
    pub dir: PathBuf,
    pub run_seconds: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl ExperimentOutcome {
    /// Writes `run_meta.json` next to the manifest.
    pub fn write_metadata(&self, cfg: &RunConfig) -> Result<()> {
        RunMetadata {
            kind: self.manifest.kind,
            master_seed: cfg.experiment.master_seed,
            config: cfg,
            total_seconds: self.total_seconds,
            run_seconds: self.run_seconds.clone(),
        }
        .write(&self.dir.join("run_meta.json"))
    }
}

/// Experiment 1: one residual trace CSV per (τ, instance, initial point)
/// under `output_dir/exp1/`, plus `manifest.json`. Failed runs are recorded
/// and the remaining runs continue.
pub fn run_exp1(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = cfg.experiment.output_dir.join("exp1");
    fs::create_dir_all(&dir)?;
    let launched: Vec<Launched> = exp1_plans(&cfg.experiment)
        .par_iter()
        .map(|plan| exp1_run(cfg, plan, &dir))
        .collect();
    finish(cfg, ExperimentKind::Exp1, dir, launched, start)
}

fn finish(
    cfg: &RunConfig,
    kind: ExperimentKind,
    dir: PathBuf,
    launched: Vec<Launched>,
    start: Instant,
) -> Result<ExperimentOutcome> {
    let run_seconds = launched
        .iter()
        .map(|l| (l.record.id.clone(), l.seconds))
        .collect();
    let manifest = Manifest {
        kind,
        dims: cfg.dims,
        experiment: cfg.experiment.clone(),
        solver: cfg.solver.clone(),
        runs: launched.into_iter().map(|l| l.record).collect(),
    };
    manifest.write(&dir.join("manifest.json"))?;
    let outcome = ExperimentOutcome {
        manifest,
        dir,
        run_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    outcome.write_metadata(cfg)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Row {
    pub bounds: (f64, f64),
    pub n: usize,
    pub instance: usize,
    /// `ψ_N(x₁, y₁)` at the final iterate.
    pub objective_at_final: f64,
    /// `Ψ_N(x₁) = max_y ψ_N(x₁, y)` at the final `x₁`.
    pub psi_inner_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Summary {
    pub bounds: (f64, f64),
    pub n: usize,
    pub count: usize,
    pub mean_objective: f64,
    pub sd_objective: f64,
    pub mean_psi: f64,
    pub sd_psi: f64,
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One summary per (box, N) in first-appearance order.
pub fn summarize_exp2(rows: &[Exp2Row]) -> Vec<Exp2Summary> {
    let mut keys: Vec<((f64, f64), usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.bounds, r.n)) {
            keys.push((r.bounds, r.n));
        }
    }
    keys.into_iter()
        .map(|(bounds, n)| {
            let group: Vec<&Exp2Row> = rows.iter().filter(|r| r.bounds == bounds && r.n == n).collect();
            let objs: Vec<f64> = group.iter().map(|r| r.objective_at_final).collect();
            let psis: Vec<f64> = group.iter().map(|r| r.psi_inner_max).collect();
            let (mean_objective, sd_objective) = mean_sd(&objs);
            let (mean_psi, sd_psi) = mean_sd(&psis);
            Exp2Summary {
                bounds,
                n,
                count: group.len(),
                mean_objective,
                sd_objective,
                mean_psi,
                sd_psi,
            }
        })
        .collect()
}

pub fn exp2_csv(rows: &[Exp2Row]) -> String {
    let mut out = format!("{EXP2_CSV_HEADER}\n");
    for r in rows {
        out += &format!(
            "{},{},{},{:e},{:e}\n",
            box_label(r.bounds),
            r.n,
            r.instance,
            r.objective_at_final,
            r.psi_inner_max
        );
    }
    out
}

pub fn exp2_summary_csv(summary: &[Exp2Summary]) -> String {
    let mut out = format!("{EXP2_SUMMARY_HEADER}\n");
    for s in summary {
        out += &format!(
            "{},{},{},{:e},{:e},{:e},{:e}\n",
            box_label(s.bounds),
            s.n,
            s.count,
            s.mean_objective,
            s.sd_objective,
            s.mean_psi,
            s.sd_psi
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct Exp2Outcome {
    pub experiment: ExperimentOutcome,
    pub rows: Vec<Exp2Row>,
    pub summary: Vec<Exp2Summary>,
}

struct Exp2Run {
    row: Option<Exp2Row>,
    launched: Launched,
}

fn exp2_instance(cfg: &RunConfig, instance: usize) -> Vec<Exp2Run> {
    let spec = &cfg.experiment;
    let tau = spec.tau_values[0];
    let seeds = RunSeeds::derive(spec.master_seed, 0, instance, instance);
    let n_max = *spec.n_values.iter().max().unwrap();
    // all boxes and sample sizes share one draw: common random numbers,
    // smaller N are prefixes
    let full = build_problem(cfg.dims, tau, spec.boxes[0], cfg.instance.noise_scale, n_max, &seeds);
    let mut runs = Vec::new();
    for &bounds in &spec.boxes {
        for &n in &spec.n_values {
            let start = Instant::now();
            let id = format!("box{}_N{n}_inst{instance}", box_label(bounds));
            let mut record = RunRecord {
                id,
                tau,
                n,
                bounds,
                instance,
                init: instance,
                seeds,
                status: RunOutcome::Error,
                iterations: None,
                final_resval: None,
                resampled_scenarios: 0,
                rejected_draws: 0,
                error: None,
                output: Some("exp2.csv".into()),
            };
            let outcome = full.as_ref().map_err(|e| Error::Config(e.to_string())).and_then(|full| {
                let prob = full.prefix(n)?.with_box(bounds.0, bounds.1)?;
                record.resampled_scenarios = prob.resampled_count();
                record.rejected_draws = prob.scenarios.iter().map(|s| s.rejected_draws).sum();
                let (x0, y0) = initial_point(seeds.init, cfg.dims, bounds);
                let trace = run_ippgda(&prob, &x0, &y0, &cfg.solver)?;
                let psi = inner_max_from(&trace.x1, &prob, spec.inner_max_tol, &trace.y1)?;
                Ok((trace, psi.value))
            });
            let (record, row) = match outcome {
                Ok((trace, psi)) => {
                    let last = trace.last();
                    let row = Exp2Row {
                        bounds,
                        n,
                        instance,
                        objective_at_final: last.objective,
                        psi_inner_max: psi,
                    };
                    let record = RunRecord {
                        status: trace.status.into(),
                        iterations: Some(last.k),
                        final_resval: Some(last.resval),
                        ..record
                    };
                    (record, Some(row))
                }
                Err(e) => (error_record(RunRecord { output: None, ..record }, &e), None),
            };
            runs.push(Exp2Run {
                row,
                launched: Launched {
                    record,
                    seconds: start.elapsed().as_secs_f64(),
                },
            });
        }
    }
    runs
}

/// Experiment 2: IPPGDA on nested samples for every (box, N, instance).
/// Writes `exp2.csv`, `exp2_summary.csv` and `manifest.json` under
/// `output_dir/exp2/`. Rows of failed runs are left out of both CSVs and
/// reported in the manifest. Only the first τ value is used.
pub fn run_exp2(cfg: &RunConfig) -> Result<Exp2Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = &cfg.experiment;
    let dir = spec.output_dir.join("exp2");
    fs::create_dir_all(&dir)?;
    let per_instance: Vec<Vec<Exp2Run>> = (0..spec.num_instances)
        .into_par_iter()
        .map(|i| exp2_instance(cfg, i))
        .collect();

    // reorder to (box, N, instance)
    let mut runs: Vec<Exp2Run> = per_instance.into_iter().flatten().collect();
    let key = |r: &Exp2Run| {
        let rec = &r.launched.record;
        let b = spec.boxes.iter().position(|&b| b == rec.bounds).unwrap();
        let n = spec.n_values.iter().position(|&n| n == rec.n).unwrap();
        (b, n, rec.instance)
    };
    runs.sort_by_key(key);

    let rows: Vec<Exp2Row> = runs.iter().filter_map(|r| r.row.clone()).collect();
    let summary = summarize_exp2(&rows);
    fs::write(dir.join("exp2.csv"), exp2_csv(&rows))?;
    fs::write(dir.join("exp2_summary.csv"), exp2_summary_csv(&summary))?;
    let launched = runs.into_iter().map(|r| r.launched).collect();
    let experiment = finish(cfg, ExperimentKind::Exp2, dir, launched, start)?;
    Ok(Exp2Outcome {
        experiment,
        rows,
        summary,
    })
}

/// Mean and sample sd over instances of `|val(N_large) − val(N_small)|`,
/// pairing rows by instance within one box.
pub fn paired_differences(
    rows: &[Exp2Row],
    bounds: (f64, f64),
    n_small: usize,
    n_large: usize,
    value: impl Fn(&Exp2Row) -> f64,
) -> (f64, f64) {
    let diffs: Vec<f64> = rows
        .iter()
        .filter(|r| r.bounds == bounds && r.n == n_small)
        .filter_map(|small| {
            rows.iter()
                .find(|r| r.bounds == bounds && r.n == n_large && r.instance == small.instance)
                .map(|large| (value(large) - value(small)).abs())
        })
        .collect();
    mean_sd(&diffs)
}
