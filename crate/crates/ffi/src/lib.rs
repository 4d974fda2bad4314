//! C ABI for the stochminimax solver.
//!
//! Problems and traces are opaque heap handles released with their `_free`
//! functions. Every fallible call returns an [`SmxStatus`]; on failure the
//! message is available from [`smx_last_error_message`] on the same thread.
//! Panics are caught at the boundary and reported as `SMX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use stochminimax::ippgda::saa_objective;
use stochminimax::second_stage::semismooth_newton;
use stochminimax::{run_ippgda, Dimensions, Error, IppgdaTrace, KktPoint, RunStatus, SaaProblem, SolverConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Singular = 4,
    IndefiniteScenario = 5,
    NotConverged = 6,
    Parse = 7,
    Io = 8,
    Config = 9,
    Panic = 10,
}

pub struct SmxProblem(SaaProblem);

pub struct SmxTrace(IppgdaTrace);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmxDims {
    pub n1: usize,
    pub m1: usize,
    pub n2: usize,
    pub m2: usize,
    pub l2: usize,
    pub s2: usize,
}

impl From<SmxDims> for Dimensions {
    fn from(d: SmxDims) -> Self {
        Dimensions {
            n1: d.n1,
            m1: d.m1,
            n2: d.n2,
            m2: d.m2,
            l2: d.l2,
            s2: d.s2,
        }
    }
}

impl From<Dimensions> for SmxDims {
    fn from(d: Dimensions) -> Self {
        SmxDims {
            n1: d.n1,
            m1: d.m1,
            n2: d.n2,
            m2: d.m2,
            l2: d.l2,
            s2: d.s2,
        }
    }
}

/// Subset of the solver configuration; nonpositive step sizes select the
/// library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmxSolverOptions {
    pub beta_x: f64,
    pub beta_y: f64,
    pub resval_tol: f64,
    pub newton_tol_cap: f64,
    pub max_outer_iters: usize,
    pub parallel: c_int,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmxTraceRecord {
    pub k: usize,
    pub resval: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub objective: f64,
    pub newton_iters: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SmxStatus {
    match e.root() {
        Error::InvalidArgument(_) | Error::NonFinite { .. } | Error::UnsupportedStructure => {
            SmxStatus::InvalidArgument
        }
        Error::InvalidDims(_) | Error::DimensionMismatch(_) => SmxStatus::DimensionMismatch,
        Error::SingularMatrix { .. } | Error::SingularJacobian { .. } | Error::NotSymmetric(_) => {
            SmxStatus::Singular
        }
        Error::IndefiniteScenario { .. } => SmxStatus::IndefiniteScenario,
        Error::MaxIterations { .. } | Error::LineSearch { .. } | Error::Inner { .. } => {
            SmxStatus::NotConverged
        }
        Error::Json(_) | Error::SchemaMismatch(_) | Error::EmptyPlot(_) => SmxStatus::Parse,
        Error::Io(_) => SmxStatus::Io,
        Error::Config(_) => SmxStatus::Config,
    }
}

fn fail(status: SmxStatus, msg: &str) -> SmxStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), SmxStatus>) -> SmxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SmxStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(SmxStatus::Panic, "panic inside stochminimax"),
    }
}

fn lib_err(e: Error) -> SmxStatus {
    fail(status_of(&e), &e.to_string())
}

fn null() -> SmxStatus {
    fail(SmxStatus::NullPointer, "null pointer argument")
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], SmxStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], SmxStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, SmxStatus> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SmxStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn problem_ref<'a>(p: *const SmxProblem) -> Result<&'a SaaProblem, SmxStatus> {
    p.as_ref().map(|p| &p.0).ok_or_else(null)
}

unsafe fn trace_ref<'a>(t: *const SmxTrace) -> Result<&'a IppgdaTrace, SmxStatus> {
    t.as_ref().map(|t| &t.0).ok_or_else(null)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn smx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn smx_default_dims() -> SmxDims {
    Dimensions::default().into()
}

#[no_mangle]
pub extern "C" fn smx_solver_options_default() -> SmxSolverOptions {
    let cfg = SolverConfig::default();
    SmxSolverOptions {
        beta_x: 0.0,
        beta_y: 0.0,
        resval_tol: cfg.resval_tol,
        newton_tol_cap: cfg.newton_tol_cap,
        max_outer_iters: cfg.max_outer_iters,
        parallel: c_int::from(cfg.parallel),
    }
}

/// Generates an instance and `n` scenarios.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn smx_problem_generate(
    dims: SmxDims,
    tau: f64,
    lb: f64,
    ub: f64,
    n: usize,
    instance_seed: u64,
    scenario_seed: u64,
    out: *mut *mut SmxProblem,
) -> SmxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let prob = SaaProblem::generate(dims.into(), tau, lb, ub, n, instance_seed, scenario_seed)
            .map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmxProblem(prob)));
        Ok(())
    })
}

/// Parses a problem serialized by `smx_problem_to_json` or the CLI `gen`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smx_problem_from_json(json: *const c_char, out: *mut *mut SmxProblem) -> SmxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let prob = SaaProblem::from_json(cstr(json)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmxProblem(prob)));
        Ok(())
    })
}

/// Serializes a problem; free the string with `smx_string_free`.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smx_problem_to_json(problem: *const SmxProblem, out: *mut *mut c_char) -> SmxStatus {
    guard(|| {
        let prob = problem_ref(problem)?;
        if out.is_null() {
            return Err(null());
        }
        let text = prob.to_json().map_err(lib_err)?;
        *out = CString::new(text)
            .map_err(|_| fail(SmxStatus::Parse, "JSON contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn smx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `problem` must be a handle from this library (or null) and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smx_problem_free(problem: *mut SmxProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smx_problem_dims(problem: *const SmxProblem, out: *mut SmxDims) -> SmxStatus {
    guard(|| {
        let prob = problem_ref(problem)?;
        if out.is_null() {
            return Err(null());
        }
        *out = prob.instance.dims.into();
        Ok(())
    })
}

/// Number of scenarios, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn smx_problem_num_scenarios(problem: *const SmxProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.n())
}

/// Solves scenario `index` at `(x1, y1)` from a cold start. `mu_out`
/// receives `(x₂, y₂, π_x, π_y)` and must hold `n2 + m2 + l2 + s2` values;
/// `iterations` and `residual` may be null.
///
/// # Safety
/// Array pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn smx_solve_scenario(
    problem: *const SmxProblem,
    index: usize,
    x1: *const f64,
    n1: usize,
    y1: *const f64,
    m1: usize,
    tol: f64,
    mu_out: *mut f64,
    mu_len: usize,
    iterations: *mut usize,
    residual: *mut f64,
) -> SmxStatus {
    guard(|| {
        let prob = problem_ref(problem)?;
        let scn = prob.scenarios.get(index).ok_or_else(|| {
            fail(
                SmxStatus::InvalidArgument,
                &format!("scenario index {index} out of range ({} scenarios)", prob.n()),
            )
        })?;
        let (x1, y1) = (slice(x1, n1)?, slice(y1, m1)?);
        let dims = prob.instance.dims;
        if n1 != dims.n1 || m1 != dims.m1 || mu_len != dims.kkt_dim() {
            return Err(fail(
                SmxStatus::DimensionMismatch,
                &format!("expected n1 = {}, m1 = {}, mu_len = {}", dims.n1, dims.m1, dims.kkt_dim()),
            ));
        }
        let report = semismooth_newton(scn, x1, y1, &KktPoint::zeros_for(scn), tol, &Default::default())
            .map_err(lib_err)?;
        slice_mut(mu_out, mu_len)?.copy_from_slice(&report.point.to_vec());
        if !iterations.is_null() {
            *iterations = report.iterations;
        }
        if !residual.is_null() {
            *residual = report.residual_norm;
        }
        Ok(())
    })
}

/// `ψ_N(x₁, y₁)` with second stages solved to `tol`.
///
/// # Safety
/// Array pointers must be valid for their stated lengths; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smx_saa_objective(
    problem: *const SmxProblem,
    x1: *const f64,
    n1: usize,
    y1: *const f64,
    m1: usize,
    tol: f64,
    out: *mut f64,
) -> SmxStatus {
    guard(|| {
        let prob = problem_ref(problem)?;
        if out.is_null() {
            return Err(null());
        }
        *out = saa_objective(slice(x1, n1)?, slice(y1, m1)?, prob, tol).map_err(lib_err)?;
        Ok(())
    })
}

/// Runs IPPGDA from `(x0, y0)`. `options` may be null for defaults.
///
/// # Safety
/// Array pointers must be valid for their stated lengths; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smx_run_ippgda(
    problem: *const SmxProblem,
    x0: *const f64,
    n1: usize,
    y0: *const f64,
    m1: usize,
    options: *const SmxSolverOptions,
    out: *mut *mut SmxTrace,
) -> SmxStatus {
    guard(|| {
        let prob = problem_ref(problem)?;
        if out.is_null() {
            return Err(null());
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| smx_solver_options_default());
        let positive = |v: f64| (v > 0.0).then_some(v);
        let cfg = SolverConfig {
            beta_x: positive(opts.beta_x),
            beta_y: positive(opts.beta_y),
            resval_tol: opts.resval_tol,
            newton_tol_cap: opts.newton_tol_cap,
            newton_tol_floor: SolverConfig::default().newton_tol_floor.min(opts.newton_tol_cap),
            max_outer_iters: opts.max_outer_iters,
            parallel: opts.parallel != 0,
            ..Default::default()
        };
        let trace = run_ippgda(prob, slice(x0, n1)?, slice(y0, m1)?, &cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SmxTrace(trace)));
        Ok(())
    })
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn smx_trace_len(trace: *const SmxTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.records.len())
}

/// 1 if the run met the Res.val tolerance, 0 otherwise (including null).
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn smx_trace_converged(trace: *const SmxTrace) -> c_int {
    trace
        .as_ref()
        .map_or(0, |t| c_int::from(t.0.status == RunStatus::Converged))
}

/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn smx_trace_record(trace: *const SmxTrace, i: usize, out: *mut SmxTraceRecord) -> SmxStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        if out.is_null() {
            return Err(null());
        }
        let r = t.records.get(i).ok_or_else(|| {
            fail(
                SmxStatus::InvalidArgument,
                &format!("record {i} out of range ({} records)", t.records.len()),
            )
        })?;
        *out = SmxTraceRecord {
            k: r.k,
            resval: r.resval,
            delta: r.delta,
            epsilon: r.epsilon,
            objective: r.objective,
            newton_iters: r.newton_iters,
        };
        Ok(())
    })
}

/// Copies the final iterate into `x1` (length n1) and `y1` (length m1).
///
/// # Safety
/// Array pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn smx_trace_solution(
    trace: *const SmxTrace,
    x1: *mut f64,
    n1: usize,
    y1: *mut f64,
    m1: usize,
) -> SmxStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        if n1 != t.x1.len() || m1 != t.y1.len() {
            return Err(fail(
                SmxStatus::DimensionMismatch,
                &format!("expected n1 = {}, m1 = {}", t.x1.len(), t.y1.len()),
            ));
        }
        slice_mut(x1, n1)?.copy_from_slice(&t.x1);
        slice_mut(y1, m1)?.copy_from_slice(&t.y1);
        Ok(())
    })
}

/// Writes the trace CSV (`k,resval,delta,objective,newton_iters`).
///
/// # Safety
/// `trace` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn smx_trace_write_csv(trace: *const SmxTrace, path: *const c_char) -> SmxStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let path = cstr(path)?;
        let file = std::fs::File::create(path).map_err(|e| lib_err(e.into()))?;
        t.write_csv(std::io::BufWriter::new(file)).map_err(lib_err)
    })
}

/// # Safety
/// `trace` must be a handle from this library (or null) and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smx_trace_free(trace: *mut SmxTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
