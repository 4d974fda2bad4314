//! Inexact parallel proximal gradient descent-ascent on the SAA problem.
//!
//! Each outer iteration `k`:
//!
//! 1. solves the `N` second-stage KKT systems at `(x₁ᵏ, y₁ᵏ)` to
//!    `‖H‖ ≤ εᵏ`, warm-started from the previous iterate's solutions;
//! 2. forms `ṽ_x = (1/N) Σ Tᵢᵀπ_x,ᵢ` and `ṽ_y = −(1/N) Σ Aᵢᵀπ_y,ᵢ`;
//! 3. evaluates Res.val and stops once it is at most `resval_tol`;
//! 4. takes one proximal ascent step in `y₁` and one proximal descent step
//!    in `x₁`, both from `(x₁ᵏ, y₁ᵏ)`.
//!
//! The inner tolerance follows `εᵏ = min(cap, δᵏ √λ̲ / max(ā, t̄))` with
//! `δᵏ = max(δ₀ ρᵏ, δ_floor)`, `ā = maxᵢ ‖Aᵢ‖₂`, `t̄ = maxᵢ ‖Tᵢ‖₂`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LambdaMode, NewtonSettings, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, min_singular_value, norm1, norm2};
use crate::problem::{ProblemInstance, SaaProblem, Scenario};
use crate::second_stage::{
    generalized_jacobian, second_stage_value, semismooth_newton, KktPoint, NewtonReport,
};

/// Scenarios probed per iteration when estimating `λ̲`.
pub const LAMBDA_PROBES: usize = 20;
/// Iteration cap of [`inner_max`].
pub const INNER_MAX_ITERS: usize = 10_000;

const HALVING_WINDOW: usize = 50;
const HALVING_GROWTH: f64 = 10.0;

/// `ṽ_x = (1/N) Σ Tᵢᵀπ_x,ᵢ`, `ṽ_y = −(1/N) Σ Aᵢᵀπ_y,ᵢ`, summed in list order.
pub fn aggregate_gradients(points: &[KktPoint], scns: &[Scenario]) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.is_empty() || points.len() != scns.len() {
        return Err(Error::DimensionMismatch(format!(
            "need equally many (>= 1) points and scenarios, got {} and {}",
            points.len(),
            scns.len()
        )));
    }
    let mut vx = vec![0.0; scns[0].t_mat.cols()];
    let mut vy = vec![0.0; scns[0].a_mat.cols()];
    for (p, s) in points.iter().zip(scns) {
        axpy(1.0, &s.t_mat.tr_mul_vec(&p.pi_x), &mut vx);
        axpy(-1.0, &s.a_mat.tr_mul_vec(&p.pi_y), &mut vy);
    }
    let inv_n = 1.0 / points.len() as f64;
    vx.iter_mut().chain(vy.iter_mut()).for_each(|v| *v *= inv_n);
    Ok((vx, vy))
}

/// `F₁(x₁, y₁)`, including the `‖x₁‖₁` term.
pub fn first_stage_value(x1: &[f64], y1: &[f64], inst: &ProblemInstance) -> f64 {
    norm1(x1) - 0.5 * dot(x1, &inst.q1.mul_vec(x1)) + dot(&inst.d1, x1)
        + dot(x1, &inst.o1.mul_vec(y1))
        - 0.5 * dot(y1, &inst.s1.mul_vec(y1))
        - dot(&inst.t1, y1)
}

/// `∇ₓψ₁ = −Q₁x₁ + d₁ + O₁y₁` (smooth part only).
pub fn first_stage_grad_x(x1: &[f64], y1: &[f64], inst: &ProblemInstance) -> Vec<f64> {
    let mut g = inst.o1.mul_vec(y1);
    axpy(-1.0, &inst.q1.mul_vec(x1), &mut g);
    axpy(1.0, &inst.d1, &mut g);
    g
}

/// `∇ᵧψ₁ = O₁ᵀx₁ − S₁y₁ − t₁`.
pub fn first_stage_grad_y(x1: &[f64], y1: &[f64], inst: &ProblemInstance) -> Vec<f64> {
    let mut g = inst.o1.tr_mul_vec(x1);
    axpy(-1.0, &inst.s1.mul_vec(y1), &mut g);
    axpy(-1.0, &inst.t1, &mut g);
    g
}

/// Proximal ascent step for `Y₁ = ℝ^{m1}`: `y₁ + β(∇ᵧψ₁ + ṽ_y)`.
pub fn y_step(x1: &[f64], y1: &[f64], vy: &[f64], inst: &ProblemInstance, beta_y: f64) -> Vec<f64> {
    let mut g = first_stage_grad_y(x1, y1, inst);
    axpy(1.0, vy, &mut g);
    let mut y = y1.to_vec();
    axpy(beta_y, &g, &mut y);
    y
}

/// [`y_step`] followed by projection onto the box `[lo, hi]^{m1}`.
pub fn y_step_boxed(
    x1: &[f64],
    y1: &[f64],
    vy: &[f64],
    inst: &ProblemInstance,
    beta_y: f64,
    (lo, hi): (f64, f64),
) -> Vec<f64> {
    y_step(x1, y1, vy, inst, beta_y)
        .into_iter()
        .map(|v| v.clamp(lo, hi))
        .collect()
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// `argmin_{x ∈ [lb, ub]} β|x| + ½(x − v)²`.
#[inline]
pub fn prox_l1_box(v: f64, beta: f64, lb: f64, ub: f64) -> f64 {
    soft_threshold(v, beta).clamp(lb, ub)
}

/// Proximal descent step: `prox_l1_box(x₁ − βw, β, lb, ub)` per coordinate
/// with `w = ∇ₓψ₁ + ṽ_x`.
pub fn x_step(x1: &[f64], y1: &[f64], vx: &[f64], inst: &ProblemInstance, beta_x: f64) -> Vec<f64> {
    let mut w = first_stage_grad_x(x1, y1, inst);
    axpy(1.0, vx, &mut w);
    x1.iter()
        .zip(&w)
        .map(|(x, wj)| prox_l1_box(x - beta_x * wj, beta_x, inst.lb, inst.ub))
        .collect()
}

/// Subgradient of `|x|` picked to minimize the Res.val distance term.
fn res_eta(x: f64, w: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else if x > 0.0 {
        1.0
    } else if (-1.0..=1.0).contains(&w) {
        -w
    } else if w > 1.0 {
        -1.0
    } else {
        1.0
    }
}

/// Res.val: `‖∇ᵧψ₁ + ṽ_y‖ + ‖x₁ − mid(x₁ − η − w, ub, lb)‖` with
/// `w = d₁ + O₁y₁ + ṽ_x − Q₁x₁`.
pub fn residual_value(
    x1: &[f64],
    y1: &[f64],
    vx: &[f64],
    vy: &[f64],
    inst: &ProblemInstance,
) -> f64 {
    let mut gy = first_stage_grad_y(x1, y1, inst);
    axpy(1.0, vy, &mut gy);
    let mut w = first_stage_grad_x(x1, y1, inst);
    axpy(1.0, vx, &mut w);
    let x_part = x1
        .iter()
        .zip(&w)
        .map(|(&x, &wj)| {
            let mid = (x - res_eta(x, wj) - wj).clamp(inst.lb, inst.ub);
            (x - mid) * (x - mid)
        })
        .sum::<f64>()
        .sqrt();
    norm2(&gy) + x_part
}

/// `δᵏ = max(δ₀ ρᵏ, δ_floor)`.
pub fn delta_at(cfg: &SolverConfig, k: usize) -> f64 {
    let exp = i32::try_from(k).unwrap_or(i32::MAX);
    (cfg.delta0 * cfg.delta_decay.powi(exp)).max(cfg.delta_floor)
}

fn coupling_scale(inst: &ProblemInstance) -> f64 {
    1.0 + inst.q1.spectral_norm() + inst.o1.spectral_norm() + inst.s1.spectral_norm()
}

/// Default x-step `0.1 / (1 + ‖Q₁‖₂ + ‖O₁‖₂ + ‖S₁‖₂)`.
pub fn default_step_size(inst: &ProblemInstance) -> f64 {
    0.1 / coupling_scale(inst)
}

/// Default y-step `1 / (1 + ‖Q₁‖₂ + ‖O₁‖₂ + ‖S₁‖₂)`. With equal steps `y₁`
/// lags its maximizer after a far start and `Ψ_N(x₁ᵏ)` can rise for dozens
/// of iterations.
pub fn default_y_step_size(inst: &ProblemInstance) -> f64 {
    1.0 / coupling_scale(inst)
}

/// `(ā, t̄) = (maxᵢ ‖Aᵢ‖₂, maxᵢ ‖Tᵢ‖₂)`.
pub fn coupling_norms(scns: &[Scenario]) -> (f64, f64) {
    scns.iter().fold((0.0_f64, 0.0_f64), |(a, t), s| {
        (a.max(s.a_mat.spectral_norm()), t.max(s.t_mat.spectral_norm()))
    })
}

/// Solves every scenario at `(x₁, y₁)` from the given warm starts; results
/// come back in scenario order regardless of `parallel`.
pub fn solve_scenarios(
    scns: &[Scenario],
    x1: &[f64],
    y1: &[f64],
    warm: &[KktPoint],
    tol: f64,
    newton: &NewtonSettings,
    parallel: bool,
) -> std::result::Result<Vec<NewtonReport>, (usize, Error)> {
    let solve = |(i, (s, w)): (usize, (&Scenario, &KktPoint))| {
        semismooth_newton(s, x1, y1, w, tol, newton).map_err(|e| (i, e))
    };
    if parallel {
        scns.par_iter().zip(warm.par_iter()).enumerate().map(solve).collect()
    } else {
        scns.iter().zip(warm.iter()).enumerate().map(solve).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub resval: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// `ψ_N(x₁ᵏ, y₁ᵏ)` from this iteration's second-stage solutions.
    pub objective: f64,
    pub newton_iters: usize,
    pub x1: Vec<f64>,
    pub y1: Vec<f64>,
}

pub const TRACE_CSV_HEADER: &str = "k,resval,delta,objective,newton_iters";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IppgdaTrace {
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
    pub x1: Vec<f64>,
    pub y1: Vec<f64>,
    pub beta_x: f64,
    pub beta_y: f64,
    /// Final `√λ̲` used in the inner tolerance.
    pub sqrt_lambda_lb: f64,
    pub step_halvings: usize,
}

impl IppgdaTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace has at least one record")
    }

    pub fn total_newton_iters(&self) -> usize {
        self.records.iter().map(|r| r.newton_iters).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{}",
                r.k, r.resval, r.delta, r.objective, r.newton_iters
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Mutable state of one IPPGDA run.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub k: usize,
    pub x1: Vec<f64>,
    pub y1: Vec<f64>,
    pub vx_tilde: Vec<f64>,
    pub vy_tilde: Vec<f64>,
    pub delta_k: f64,
    pub epsilon_k: f64,
    pub resval: f64,
    /// Last second-stage solution per scenario index.
    pub warm_starts: Vec<KktPoint>,
}

/// Stepwise driver; [`run_ippgda`] is the usual entry point.
pub struct Ippgda<'a> {
    prob: &'a SaaProblem,
    cfg: SolverConfig,
    newton: NewtonSettings,
    state: IterateState,
    beta_x: f64,
    beta_y: f64,
    coupling: f64,
    sqrt_lambda: Option<f64>,
    resval_history: Vec<f64>,
    last_halving: Option<usize>,
    halvings: usize,
    records: Vec<TraceRecord>,
}

impl<'a> Ippgda<'a> {
    pub fn new(prob: &'a SaaProblem, x0: &[f64], y0: &[f64], cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let inst = &prob.instance;
        if x0.len() != inst.dims.n1 || y0.len() != inst.dims.m1 {
            return Err(Error::DimensionMismatch(format!(
                "initial point ({}, {}) does not match (n1, m1) = ({}, {})",
                x0.len(),
                y0.len(),
                inst.dims.n1,
                inst.dims.m1
            )));
        }
        if x0.iter().any(|&x| !(inst.lb..=inst.ub).contains(&x)) {
            return Err(Error::InvalidArgument(format!(
                "x0 must lie in [{}, {}]^n1",
                inst.lb, inst.ub
            )));
        }
        let (a_bar, t_bar) = coupling_norms(&prob.scenarios);
        let sqrt_lambda = match cfg.lambda_lb_mode {
            LambdaMode::Configured(v) => Some(v.sqrt()),
            LambdaMode::Estimated => None,
        };
        Ok(Self {
            prob,
            newton: cfg.newton(),
            beta_x: cfg.beta_x.unwrap_or_else(|| default_step_size(inst)),
            beta_y: cfg.beta_y.unwrap_or_else(|| default_y_step_size(inst)),
            coupling: a_bar.max(t_bar).max(f64::MIN_POSITIVE),
            sqrt_lambda,
            state: IterateState {
                k: 0,
                x1: x0.to_vec(),
                y1: y0.to_vec(),
                vx_tilde: vec![0.0; inst.dims.n1],
                vy_tilde: vec![0.0; inst.dims.m1],
                delta_k: cfg.delta0,
                epsilon_k: cfg.newton_tol_cap,
                resval: f64::INFINITY,
                warm_starts: prob.scenarios.iter().map(KktPoint::zeros_for).collect(),
            },
            cfg: cfg.clone(),
            resval_history: Vec::new(),
            last_halving: None,
            halvings: 0,
            records: Vec::new(),
        })
    }

    pub fn state(&self) -> &IterateState {
        &self.state
    }

    pub fn step_sizes(&self) -> (f64, f64) {
        (self.beta_x, self.beta_y)
    }

    /// `√λ̲` from the current probe Jacobians, folded into the running minimum.
    fn update_lambda(&mut self) -> Result<f64> {
        if let LambdaMode::Configured(v) = self.cfg.lambda_lb_mode {
            return Ok(v.sqrt());
        }
        let n = self.prob.n();
        let probes = LAMBDA_PROBES.min(n);
        let mut smin = f64::INFINITY;
        for j in 0..probes {
            let i = j * n / probes;
            let g = generalized_jacobian(
                &self.state.warm_starts[i],
                &self.prob.scenarios[i],
                &self.state.x1,
                &self.state.y1,
            )?;
            smin = smin.min(min_singular_value(&g));
        }
        let estimate = 0.5 * smin;
        let current = self.sqrt_lambda.map_or(estimate, |s| s.min(estimate));
        self.sqrt_lambda = Some(current);
        Ok(current)
    }

    /// Solves the second stages at the current iterate and records Res.val.
    pub fn evaluate(&mut self) -> Result<&TraceRecord> {
        let k = self.state.k;
        let delta = delta_at(&self.cfg, k);
        let sqrt_lambda = self.update_lambda()?;
        let mut epsilon = (delta * sqrt_lambda / self.coupling).min(self.cfg.newton_tol_cap);
        if let Some(prev) = self.records.last() {
            epsilon = epsilon.min(prev.epsilon);
        }
        epsilon = epsilon.max(self.cfg.newton_tol_floor);

        let reports = solve_scenarios(
            &self.prob.scenarios,
            &self.state.x1,
            &self.state.y1,
            &self.state.warm_starts,
            epsilon,
            &self.newton,
            self.cfg.parallel,
        )
        .map_err(|(scenario, e)| Error::Inner {
            iteration: k,
            scenario,
            source: Box::new(e),
        })?;
        let newton_iters = reports.iter().map(|r| r.iterations).sum();
        let points: Vec<KktPoint> = reports.into_iter().map(|r| r.point).collect();
        let (vx, vy) = aggregate_gradients(&points, &self.prob.scenarios)?;

        let inst = &self.prob.instance;
        let resval = residual_value(&self.state.x1, &self.state.y1, &vx, &vy, inst);
        let objective = first_stage_value(&self.state.x1, &self.state.y1, inst)
            + mean_value(&points, &self.prob.scenarios);

        self.state.delta_k = delta;
        self.state.epsilon_k = epsilon;
        self.state.resval = resval;
        self.state.vx_tilde = vx;
        self.state.vy_tilde = vy;
        self.state.warm_starts = points;
        self.resval_history.push(resval);
        self.records.push(TraceRecord {
            k,
            resval,
            delta,
            epsilon,
            objective,
            newton_iters,
            x1: self.state.x1.clone(),
            y1: self.state.y1.clone(),
        });
        Ok(self.records.last().unwrap())
    }

    /// Takes the y- and x-steps from the evaluated iterate.
    pub fn advance(&mut self) {
        let k = self.state.k;
        if self.cfg.step_halving && k >= HALVING_WINDOW {
            let grew = self.state.resval > HALVING_GROWTH * self.resval_history[k - HALVING_WINDOW];
            let cooled = self.last_halving.is_none_or(|l| k - l >= HALVING_WINDOW);
            if grew && cooled {
                self.beta_x *= 0.5;
                self.beta_y *= 0.5;
                self.last_halving = Some(k);
                self.halvings += 1;
            }
        }
        let inst = &self.prob.instance;
        let s = &self.state;
        let y_next = match self.cfg.y_box {
            Some(bounds) => y_step_boxed(&s.x1, &s.y1, &s.vy_tilde, inst, self.beta_y, bounds),
            None => y_step(&s.x1, &s.y1, &s.vy_tilde, inst, self.beta_y),
        };
        // x-step uses (x₁ᵏ, y₁ᵏ), not the fresh y
        let x_next = x_step(&s.x1, &s.y1, &s.vx_tilde, inst, self.beta_x);
        self.state.x1 = x_next;
        self.state.y1 = y_next;
        self.state.k += 1;
    }

    pub fn run(mut self) -> Result<IppgdaTrace> {
        let status = loop {
            let resval = self.evaluate()?.resval;
            if resval <= self.cfg.resval_tol {
                break RunStatus::Converged;
            }
            if self.state.k >= self.cfg.max_outer_iters {
                break RunStatus::MaxIters;
            }
            self.advance();
        };
        Ok(IppgdaTrace {
            status,
            x1: self.state.x1,
            y1: self.state.y1,
            beta_x: self.beta_x,
            beta_y: self.beta_y,
            sqrt_lambda_lb: self.sqrt_lambda.unwrap_or(f64::NAN),
            step_halvings: self.halvings,
            records: self.records,
        })
    }
}

/// Runs IPPGDA from `(x0, y0)` until Res.val ≤ `resval_tol` or the
/// iteration cap.
pub fn run_ippgda(prob: &SaaProblem, x0: &[f64], y0: &[f64], cfg: &SolverConfig) -> Result<IppgdaTrace> {
    Ippgda::new(prob, x0, y0, cfg)?.run()
}

fn mean_value(points: &[KktPoint], scns: &[Scenario]) -> f64 {
    let total: f64 = points.iter().zip(scns).map(|(p, s)| second_stage_value(p, s)).sum();
    total / points.len() as f64
}

fn cold_starts(prob: &SaaProblem) -> Vec<KktPoint> {
    prob.scenarios.iter().map(KktPoint::zeros_for).collect()
}

fn check_first_stage(prob: &SaaProblem, x1: &[f64], y1: &[f64]) -> Result<()> {
    let d = prob.instance.dims;
    if x1.len() != d.n1 || y1.len() != d.m1 {
        return Err(Error::DimensionMismatch(format!(
            "first-stage point ({}, {}) does not match (n1, m1) = ({}, {})",
            x1.len(),
            y1.len(),
            d.n1,
            d.m1
        )));
    }
    Ok(())
}

fn inner_error((scenario, e): (usize, Error)) -> Error {
    Error::Inner {
        iteration: 0,
        scenario,
        source: Box::new(e),
    }
}

/// `ψ_N(x₁, y₁) = F₁(x₁, y₁) + (1/N) Σᵢ F₂(μᵢ*)` with second stages solved to `tol`.
pub fn saa_objective(x1: &[f64], y1: &[f64], prob: &SaaProblem, tol: f64) -> Result<f64> {
    check_first_stage(prob, x1, y1)?;
    let reports = solve_scenarios(
        &prob.scenarios,
        x1,
        y1,
        &cold_starts(prob),
        tol,
        &NewtonSettings::default(),
        true,
    )
    .map_err(inner_error)?;
    let points: Vec<KktPoint> = reports.into_iter().map(|r| r.point).collect();
    Ok(first_stage_value(x1, y1, &prob.instance) + mean_value(&points, &prob.scenarios))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerMax {
    pub y1: Vec<f64>,
    /// `Ψ_N(x₁) = ‖x₁‖₁ + max_y ψ_N-smooth(x₁, y)`.
    pub value: f64,
    pub iterations: usize,
}

struct AscentPoint {
    y: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    points: Vec<KktPoint>,
}

/// Maximizes `ψ_N(x₁, ·)` by gradient ascent; stops when the gradient norm
/// is at most `tol`. Each evaluation solves all second stages to `tol / 10`.
///
/// The step along `g` is accepted when the directional derivative at the
/// trial point is still nonnegative, so the concave ray is never overshot.
/// This only uses gradients: near the maximizer value differences drown in
/// the inner-solve error long before gradients do.
pub fn inner_max(x1: &[f64], prob: &SaaProblem, tol: f64) -> Result<InnerMax> {
    inner_max_from(x1, prob, tol, &vec![0.0; prob.instance.dims.m1])
}

pub fn inner_max_from(x1: &[f64], prob: &SaaProblem, tol: f64, y_start: &[f64]) -> Result<InnerMax> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    check_first_stage(prob, x1, y_start)?;
    let inst = &prob.instance;
    let newton = NewtonSettings::default();
    let inner_tol = tol / 10.0;

    let eval = |y: Vec<f64>, warm: &[KktPoint]| -> Result<AscentPoint> {
        let reports = solve_scenarios(&prob.scenarios, x1, &y, warm, inner_tol, &newton, true)
            .map_err(inner_error)?;
        let points: Vec<KktPoint> = reports.into_iter().map(|r| r.point).collect();
        let (_, vy) = aggregate_gradients(&points, &prob.scenarios)?;
        let mut grad = first_stage_grad_y(x1, &y, inst);
        axpy(1.0, &vy, &mut grad);
        let value = first_stage_value(x1, &y, inst) + mean_value(&points, &prob.scenarios);
        Ok(AscentPoint { y, value, grad, points })
    };

    let mut cur = eval(y_start.to_vec(), &cold_starts(prob))?;
    let mut step = 1.0 / inst.s1.spectral_norm().max(f64::MIN_POSITIVE);
    for it in 0..INNER_MAX_ITERS {
        if norm2(&cur.grad) <= tol {
            return Ok(InnerMax {
                y1: cur.y,
                value: cur.value,
                iterations: it,
            });
        }
        loop {
            let mut y = cur.y.clone();
            axpy(step, &cur.grad, &mut y);
            let trial = eval(y, &cur.points)?;
            if dot(&trial.grad, &cur.grad) >= 0.0 || step < 1e-14 {
                cur = trial;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::MaxIterations {
        solver: "inner_max",
        iterations: INNER_MAX_ITERS,
        residual: norm2(&cur.grad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lu_solve, DenseMatrix};
    use crate::problem::{generate_instance, sample_scenarios, Dimensions};
    use crate::rng::UniformStream;
    use crate::second_stage::toy;
    use proptest::prelude::*;

    const UNIT: Dimensions = Dimensions {
        n1: 1,
        m1: 1,
        n2: 1,
        m2: 1,
        l2: 1,
        s2: 1,
    };

    /// 1-d instance with every first-stage term zeroed except `S₁ = 1`.
    fn flat_instance(lb: f64, ub: f64) -> ProblemInstance {
        let mut inst = generate_instance(UNIT, 0.5, lb, ub, 0).unwrap();
        let zero = DenseMatrix::zeros(1, 1);
        inst.q1 = zero.clone();
        inst.o1 = zero;
        inst.d1 = vec![0.0];
        inst.t1 = vec![0.0];
        inst
    }

    fn toy_problem(h: f64, c: f64) -> SaaProblem {
        SaaProblem::new(flat_instance(-10.0, 10.0), vec![toy::scenario(h, c)], 0).unwrap()
    }

    fn standard_problem(tau: f64, n: usize, seed: u64) -> SaaProblem {
        SaaProblem::generate(Dimensions::default(), tau, -10.0, 10.0, n, seed, seed + 1000).unwrap()
    }

    fn far_start(seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut r = UniformStream::new(seed);
        (r.uniform_vec(3, 7.0, 10.0), r.uniform_vec(2, 0.0, 1.0))
    }

    #[test]
    fn aggregate_examples() {
        let mut s = toy::scenario(0.1, 0.1);
        s.t_mat = DenseMatrix::identity(2);
        s.a_mat = DenseMatrix::identity(2);
        let p = |px: [f64; 2], py: [f64; 2]| KktPoint {
            x2: vec![0.0],
            y2: vec![0.0],
            pi_x: px.to_vec(),
            pi_y: py.to_vec(),
        };
        let (vx, _) = aggregate_gradients(&[p([1.0, 2.0], [0.0; 2])], &[s.clone()]).unwrap();
        assert_eq!(vx, vec![1.0, 2.0]);
        let (vx, vy) = aggregate_gradients(&[p([0.0; 2], [0.0; 2])], &[s.clone()]).unwrap();
        assert_eq!((vx, vy), (vec![0.0; 2], vec![0.0; 2]));
        let pts = [p([0.0; 2], [1.0, 0.0]), p([0.0; 2], [3.0, 0.0])];
        let (_, vy) = aggregate_gradients(&pts, &[s.clone(), s]).unwrap();
        assert_eq!(vy, vec![-2.0, 0.0]);
        assert!(aggregate_gradients(&[], &[]).is_err());
    }

    #[test]
    fn y_step_examples() {
        let inst = flat_instance(-10.0, 10.0);
        let mut inst2 = generate_instance(Dimensions { m1: 2, ..UNIT }, 0.5, -1.0, 1.0, 0).unwrap();
        inst2.o1 = DenseMatrix::zeros(1, 2);
        inst2.t1 = vec![0.0; 2];
        assert_eq!(y_step(&[0.0], &[1.0, 1.0], &[0.0; 2], &inst2, 1.0), vec![0.0, 0.0]);
        // S₁y = vy: gradient vanishes
        assert_eq!(y_step(&[0.0], &[0.5], &[0.5], &inst, 0.3), vec![0.5]);
        let beta = 1e-3;
        let y = y_step(&[2.0], &[1.0], &[0.25], &inst, beta);
        let g = first_stage_grad_y(&[2.0], &[1.0], &inst)[0] + 0.25;
        assert!((y[0] - 1.0).abs() <= beta * g.abs() + 1e-15);
        assert_eq!(y_step_boxed(&[0.0], &[5.0], &[9.0], &inst, 1.0, (-1.0, 1.0)), vec![1.0]);
    }

    #[test]
    fn x_step_examples() {
        let inst = flat_instance(-10.0, 10.0);
        // w = 0: pure shrinkage
        assert_eq!(x_step(&[3.0], &[0.0], &[0.0], &inst, 0.5), vec![2.5]);
        assert_eq!(x_step(&[-3.0], &[0.0], &[0.0], &inst, 0.5), vec![-2.5]);
        // x − βw = 20 shrinks to 19, clamps to 10
        assert_eq!(x_step(&[0.0], &[0.0], &[-20.0], &inst, 1.0), vec![10.0]);
        assert_eq!(prox_l1_box(0.3, 0.5, -1.0, 1.0), 0.0);
    }

    fn grid_prox(v: f64, beta: f64, lb: f64, ub: f64) -> f64 {
        let steps = ((ub - lb) / 1e-4).ceil() as usize;
        (0..=steps)
            .map(|i| (lb + i as f64 * 1e-4).min(ub))
            .map(|x| (beta * x.abs() + 0.5 * (x - v) * (x - v), x))
            .fold((f64::INFINITY, 0.0), |best, c| if c.0 < best.0 { c } else { best })
            .1
    }

    fn box_strategy() -> impl Strategy<Value = (f64, f64)> {
        prop_oneof![
            (-5.0..0.0f64, 0.01..5.0f64).prop_map(|(l, w)| (l, l + w)),
            (0.01..3.0f64, 0.01..3.0f64).prop_map(|(l, w)| (l, l + w)),
            (-6.0..-0.01f64, 0.01..3.0f64).prop_map(|(u, w)| (u - w, u)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn prox_matches_grid_search(v in -8.0..8.0f64, beta in 0.01..3.0f64, (lb, ub) in box_strategy()) {
            let closed = prox_l1_box(v, beta, lb, ub);
            prop_assert!((lb..=ub).contains(&closed));
            prop_assert!((closed - grid_prox(v, beta, lb, ub)).abs() <= 1e-3);
        }

        #[test]
        fn delta_schedule_shape(d0 in 1e-6..1.0f64, rho in 0.01..0.99f64, k in 0usize..200) {
            let cfg = SolverConfig { delta0: d0, delta_decay: rho, delta_floor: d0 * 1e-9, ..Default::default() };
            let (a, b) = (delta_at(&cfg, k), delta_at(&cfg, k + 1));
            prop_assert!(b <= a);
            prop_assert!(b >= cfg.delta_floor);
            if b > cfg.delta_floor {
                prop_assert!(((a / b) - 1.0 / rho).abs() <= 1e-9 / rho);
            }
        }
    }

    #[test]
    fn residual_value_examples() {
        let inst = flat_instance(-10.0, 10.0);
        // x = 0, w = 0.5 → η = −0.5 and the x-part vanishes; y-part is 0 at y = 0
        assert_eq!(residual_value(&[0.0], &[0.0], &[0.5], &[0.0], &inst), 0.0);
        assert_eq!(residual_value(&[0.0], &[0.0], &[2.0], &[0.0], &inst), 1.0);
        assert_eq!(residual_value(&[0.0], &[0.0], &[-2.0], &[0.0], &inst), 1.0);
        // x > 0: x − mid(x − 1 − w) = 1 + w inside the box
        assert!((residual_value(&[3.0], &[0.0], &[0.5], &[0.0], &inst) - 1.5).abs() < 1e-15);
        // y-part: ‖−S₁y − t₁ + O₁ᵀx + vy‖
        assert_eq!(residual_value(&[0.0], &[2.0], &[0.0], &[0.5], &inst), 1.5);
        assert_eq!(res_eta(-1.0, 5.0), -1.0);
        assert_eq!(res_eta(1.0, 5.0), 1.0);
        assert_eq!(res_eta(0.0, 0.25), -0.25);
    }

    #[test]
    fn delta_schedule_arithmetic() {
        let cfg = SolverConfig::default();
        assert!((delta_at(&cfg, 3) - 1.25e-3).abs() < 1e-18);
        assert_eq!(delta_at(&cfg, 0), 1e-2);
        assert_eq!(delta_at(&cfg, 10_000), 1e-12);
    }

    #[test]
    fn stationary_start_converges_immediately() {
        let prob = toy_problem(10.0, 10.0);
        let trace = run_ippgda(&prob, &[0.0], &[0.0], &SolverConfig::default()).unwrap();
        assert_eq!(trace.status, RunStatus::Converged);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.last().resval, 0.0);
    }

    #[test]
    fn rejects_bad_start() {
        let prob = toy_problem(10.0, 10.0);
        let cfg = SolverConfig::default();
        assert!(matches!(run_ippgda(&prob, &[11.0], &[0.0], &cfg), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            run_ippgda(&prob, &[0.0, 0.0], &[0.0], &cfg),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn saa_objective_examples() {
        let mut zero = toy::scenario(10.0, 10.0);
        zero.d2 = vec![0.0];
        let prob = SaaProblem::new(flat_instance(-1.0, 1.0), vec![zero], 0).unwrap();
        assert_eq!(saa_objective(&[0.0], &[0.0], &prob, 1e-12).unwrap(), 0.0);

        let prob = toy_problem(0.1, 0.1);
        let (x, y) = ([0.5], [0.2]);
        let expected = first_stage_value(&x, &y, &prob.instance) - 0.095;
        assert!((saa_objective(&x, &y, &prob, 1e-12).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn saa_objective_order_invariance() {
        let prob = standard_problem(0.5, 12, 3);
        let mut rev = prob.clone();
        rev.scenarios.reverse();
        let (x, y) = ([0.5, -1.0, 2.0], [0.3, -0.2]);
        let a = saa_objective(&x, &y, &prob, 1e-12).unwrap();
        let b = saa_objective(&x, &y, &rev, 1e-12).unwrap();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn inner_max_trivial_case() {
        let prob = toy_problem(10.0, 10.0);
        let m = inner_max(&[0.7], &prob, 1e-8).unwrap();
        assert!(m.y1[0].abs() <= 1e-8);
        // ‖x‖₁ + F₂ at the unconstrained saddle x₂ = 1
        assert!((m.value - (0.7 - 0.5)).abs() < 1e-10);
    }

    #[test]
    fn inner_max_matches_linear_solve_when_constraints_are_slack() {
        let mut inst = generate_instance(Dimensions::default(), 0.5, -10.0, 10.0, 4).unwrap();
        inst.hbar = vec![1e3; 2];
        inst.cbar = vec![1e3; 2];
        let scns = sample_scenarios(&inst, 6, 9).unwrap();
        let prob = SaaProblem::new(inst, scns, 9).unwrap();
        let x = [0.4, -0.3, 1.1];
        let m = inner_max(&x, &prob, 1e-9).unwrap();
        // π = 0, so the maximizer solves S₁y = O₁ᵀx − t₁
        let mut rhs = prob.instance.o1.tr_mul_vec(&x);
        axpy(-1.0, &prob.instance.t1, &mut rhs);
        let y = lu_solve(&prob.instance.s1, &rhs).unwrap();
        for (a, b) in m.y1.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-6, "{:?} vs {y:?}", m.y1);
        }
    }

    #[test]
    fn inner_max_dominates_probes() {
        let prob = standard_problem(0.5, 8, 5);
        let x = [1.0, -0.5, 0.25];
        let m = inner_max(&x, &prob, 1e-9).unwrap();
        let mut r = UniformStream::new(77);
        for _ in 0..50 {
            let y = r.uniform_vec(2, -3.0, 3.0);
            let v = saa_objective(&x, &y, &prob, 1e-11).unwrap();
            assert!(m.value >= v - 1e-8, "{} < {v} at {y:?}", m.value);
        }
    }

    #[test]
    fn run_invariants_hold() {
        let prob = standard_problem(0.5, 10, 11);
        let (x0, y0) = far_start(1);
        let cfg = SolverConfig {
            max_outer_iters: 150,
            ..Default::default()
        };
        let trace = run_ippgda(&prob, &x0, &y0, &cfg).unwrap();
        assert!(trace.records.len() <= cfg.max_outer_iters + 1);
        for pair in trace.records.windows(2) {
            assert!(pair[1].delta <= pair[0].delta);
            assert!(pair[1].epsilon <= pair[0].epsilon);
            assert!(pair[1].delta >= cfg.delta_floor);
        }
        for r in &trace.records {
            assert!(r.x1.iter().all(|x| (-10.0..=10.0).contains(x)), "{:?}", r.x1);
            assert!(r.epsilon <= cfg.newton_tol_cap);
        }
    }

    #[test]
    fn parallel_and_serial_runs_agree_bitwise() {
        let prob = standard_problem(0.5, 16, 2);
        let (x0, y0) = far_start(2);
        let cfg = SolverConfig {
            max_outer_iters: 40,
            ..Default::default()
        };
        let par = run_ippgda(&prob, &x0, &y0, &cfg).unwrap();
        let ser = run_ippgda(&prob, &x0, &y0, &SolverConfig { parallel: false, ..cfg }).unwrap();
        assert_eq!(par.to_csv_string(), ser.to_csv_string());
        assert_eq!(par.x1, ser.x1);
    }

    #[test]
    fn converges_on_the_standard_setup() {
        let prob = standard_problem(0.5, 20, 6);
        let (x0, y0) = far_start(6);
        let trace = run_ippgda(&prob, &x0, &y0, &SolverConfig::default()).unwrap();
        assert_eq!(trace.status, RunStatus::Converged);
        assert!(trace.last().resval <= 1e-4);
        let csv = trace.to_csv_string();
        assert!(csv.starts_with("k,resval,delta,objective,newton_iters\n"));
        assert_eq!(csv.lines().count(), trace.records.len() + 1);
    }

    #[test]
    fn stationarity_is_stable_under_fresh_inner_solves() {
        let prob = standard_problem(0.5, 10, 8);
        let (x0, y0) = far_start(8);
        let cfg = SolverConfig {
            resval_tol: 1e-6,
            newton_tol_cap: 1e-10,
            ..Default::default()
        };
        let trace = run_ippgda(&prob, &x0, &y0, &cfg).unwrap();
        assert_eq!(trace.status, RunStatus::Converged);
        let last = trace.last();
        let cold = cold_starts(&prob);
        let fresh = solve_scenarios(&prob.scenarios, &last.x1, &last.y1, &cold, 1e-10, &cfg.newton(), false)
            .unwrap();
        let points: Vec<KktPoint> = fresh.into_iter().map(|r| r.point).collect();
        let (vx, vy) = aggregate_gradients(&points, &prob.scenarios).unwrap();
        let again = residual_value(&last.x1, &last.y1, &vx, &vy, &prob.instance);
        assert!((again - last.resval).abs() <= 1e-6, "{again} vs {}", last.resval);
    }

    #[test]
    fn merit_decreases_over_ten_iteration_windows() {
        let prob = standard_problem(0.5, 20, 13);
        let (x0, y0) = far_start(13);
        let cfg = SolverConfig {
            newton_tol_cap: 1e-10,
            ..Default::default()
        };
        let trace = run_ippgda(&prob, &x0, &y0, &cfg).unwrap();
        let psi: Vec<f64> = trace
            .records
            .iter()
            .map(|r| inner_max(&r.x1, &prob, 1e-9).unwrap().value)
            .collect();
        for k in 0..psi.len().saturating_sub(10) {
            assert!(psi[k + 10] <= psi[k] + 1e-6, "k = {k}: {} -> {}", psi[k], psi[k + 10]);
        }
    }

    #[test]
    fn inner_tolerance_respects_floor() {
        let prob = standard_problem(0.1, 10, 4);
        let (x0, y0) = far_start(4);
        let cfg = SolverConfig {
            max_outer_iters: 60,
            newton_tol_floor: 1e-11,
            ..Default::default()
        };
        let trace = run_ippgda(&prob, &x0, &y0, &cfg).unwrap();
        assert!(trace.records.iter().all(|r| r.epsilon >= 1e-11));
        assert_eq!(trace.last().epsilon, 1e-11);
    }

    #[test]
    fn csv_layout() {
        let prob = toy_problem(10.0, 10.0);
        let trace = run_ippgda(&prob, &[0.0], &[0.0], &SolverConfig::default()).unwrap();
        let csv = trace.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[0], "0");
    }
}
