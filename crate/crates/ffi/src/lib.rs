//! C ABI for `whitney-descent`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns a
//! [`WdStatus`]; on failure, [`wd_last_error_code`] and
//! [`wd_last_error_message`] describe the error on the calling thread.
//! Output arrays are caller-allocated, and a too-short buffer yields
//! `WD_STATUS_BUFFER_TOO_SMALL` without writing.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use whitney_descent::cli::{self, CliError, Problem};
use whitney_descent::descent::{descend, DescentConfig, DescentProblem, DescentTrace, PollEvent};
use whitney_descent::geometry::{ConstraintSet, Lifter, ProjectionConfig, ReducedPoint, TangentFrame};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    BufferTooSmall = 4,
    Io = 5,
    Parse = 6,
    Triangular = 7,
    Geometry = 8,
    StartOffManifold = 9,
    ProjectionFailed = 10,
    Descent = 11,
    ConstraintCheck = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WdPollEvent {
    Success = 0,
    Unsuccessful = 1,
    Rebase = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdProjectionConfig {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub oracle_radius: f64,
    pub divergence_factor: f64,
}

/// `c_forcing <= 0` selects the default `1e-4 (1 + |f(p0)|)`;
/// `alpha_max` may be `INFINITY`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdDescentConfig {
    pub alpha0: f64,
    pub alpha_max: f64,
    pub theta: f64,
    pub gamma: f64,
    pub c_forcing: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub alpha_min: f64,
    pub convergence_window: usize,
    pub projection: WdProjectionConfig,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WdTraceRecord {
    pub j: usize,
    pub alpha: f64,
    pub f: f64,
    pub event: WdPollEvent,
}

/// Objective over ambient coordinates: `f(z, n, user_data)`.
pub type WdObjectiveFn = Option<unsafe extern "C" fn(z: *const f64, n: usize, user_data: *mut c_void) -> f64>;

/// A validated problem: constraints, partition, objective and start point.
pub struct WdProblem {
    problem: Problem,
    constraints: Arc<ConstraintSet>,
    lifter: Lifter,
    projection: ProjectionConfig,
}

/// Outcome of one descent run.
pub struct WdRunResult {
    trace: DescentTrace,
}

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_error(code: &str, message: impl Into<String>) {
    let clean = |s: String| CString::new(s.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = Some(LastError {
            code: clean(code.to_string()),
            message: clean(message.into()),
        })
    });
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(WdStatus, String, String);

impl Failure {
    fn new(status: WdStatus, code: &str, message: impl Into<String>) -> Self {
        Failure(status, code.to_string(), message.into())
    }
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match &e {
            CliError::Io { .. } => WdStatus::Io,
            CliError::Problem { .. } => WdStatus::Parse,
            CliError::Triangular(_) => WdStatus::Triangular,
            CliError::Geometry(_) => WdStatus::Geometry,
            CliError::StartOffManifold { .. } => WdStatus::StartOffManifold,
            CliError::Projection(_) => WdStatus::ProjectionFailed,
            CliError::Descent(_) | CliError::Geodesic(_) => WdStatus::Descent,
            CliError::ConstraintCheck { .. } => WdStatus::ConstraintCheck,
            CliError::Usage(_) => WdStatus::InvalidArgument,
        };
        Failure(status, e.code().to_string(), e.to_string())
    }
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> WdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_error();
            WdStatus::Ok
        }
        Ok(Err(Failure(status, code, message))) => {
            set_error(&code, message);
            status
        }
        Err(_) => {
            set_error("PANIC", "internal panic");
            WdStatus::Panic
        }
    }
}

fn null() -> Failure {
    Failure::new(
        WdStatus::NullPointer,
        "NULL_POINTER",
        "required pointer argument is null",
    )
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write_out(values: &[f64], out: *mut f64, out_len: usize) -> Result<(), Failure> {
    if out_len < values.len() {
        return Err(Failure::new(
            WdStatus::BufferTooSmall,
            "BUFFER_TOO_SMALL",
            format!("need {} values, buffer holds {out_len}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null());
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null());
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(WdStatus::InvalidUtf8, "INVALID_UTF8", "string argument is not UTF-8"))
}

impl From<&WdProjectionConfig> for ProjectionConfig {
    fn from(c: &WdProjectionConfig) -> Self {
        ProjectionConfig {
            residual_tol: c.residual_tol,
            max_iters: c.max_iters,
            oracle_radius: c.oracle_radius,
            divergence_factor: c.divergence_factor,
        }
    }
}

impl From<&ProjectionConfig> for WdProjectionConfig {
    fn from(c: &ProjectionConfig) -> Self {
        WdProjectionConfig {
            residual_tol: c.residual_tol,
            max_iters: c.max_iters,
            oracle_radius: c.oracle_radius,
            divergence_factor: c.divergence_factor,
        }
    }
}

fn projection_or_default(cfg: *const WdProjectionConfig) -> ProjectionConfig {
    // SAFETY: callers pass either null or a valid config.
    unsafe { cfg.as_ref() }.map_or_else(ProjectionConfig::default, ProjectionConfig::from)
}

fn into_handle(problem: Problem, projection: ProjectionConfig, out: *mut *mut WdProblem) {
    let constraints = problem.constraint_set();
    let lifter = Lifter::new(&problem.partition);
    let handle = Box::new(WdProblem {
        problem,
        constraints,
        lifter,
        projection,
    });
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(handle) };
}

/// Fills `out` with the default projection settings.
#[no_mangle]
pub unsafe extern "C" fn wd_projection_config_default(out: *mut WdProjectionConfig) -> WdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        *out = WdProjectionConfig::from(&ProjectionConfig::default());
        Ok(())
    })
}

/// Fills `out` with the default descent settings.
#[no_mangle]
pub unsafe extern "C" fn wd_descent_config_default(out: *mut WdDescentConfig) -> WdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        let d = DescentConfig::default();
        *out = WdDescentConfig {
            alpha0: d.alpha0,
            alpha_max: d.alpha_max,
            theta: d.theta,
            gamma: d.gamma,
            c_forcing: d.c_forcing.unwrap_or(0.0),
            max_iters: d.max_iters,
            seed: d.seed,
            alpha_min: d.alpha_min,
            convergence_window: d.convergence_window,
            projection: WdProjectionConfig::from(&d.projection),
        };
        Ok(())
    })
}

/// Parses and validates a problem given as text. `cfg` may be null.
#[no_mangle]
pub unsafe extern "C" fn wd_problem_parse(
    text: *const c_char,
    cfg: *const WdProjectionConfig,
    out: *mut *mut WdProblem,
) -> WdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let text = str_arg(text)?;
        let projection = projection_or_default(cfg);
        let problem = cli::parse_problem(text)?.build(&projection)?;
        into_handle(problem, projection, out);
        Ok(())
    })
}

/// Reads, parses and validates a problem file. `cfg` may be null.
#[no_mangle]
pub unsafe extern "C" fn wd_problem_load(
    path: *const c_char,
    cfg: *const WdProjectionConfig,
    out: *mut *mut WdProblem,
) -> WdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let path = str_arg(path)?;
        let projection = projection_or_default(cfg);
        let problem = cli::load_problem(Path::new(path), &projection)?;
        into_handle(problem, projection, out);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn wd_problem_free(problem: *mut WdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of ambient variables, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn wd_problem_num_vars(problem: *const WdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.file.order.len())
}

/// Number of retained (reduced) coordinates, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn wd_problem_reduced_dim(problem: *const WdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.partition.reduced_dim())
}

/// Manifold dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn wd_problem_manifold_dim(problem: *const WdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.partition.manifold_dim())
}

/// Copies the (projected) start point in retained coordinates.
#[no_mangle]
pub unsafe extern "C" fn wd_problem_start(problem: *const WdProblem, out: *mut f64, out_len: usize) -> WdStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(null)?;
        write_out(p.problem.start.as_slice(), out, out_len)
    })
}

/// Lifts a reduced point to ambient coordinates. `warm` (eliminated
/// variables only) may be null.
#[no_mangle]
pub unsafe extern "C" fn wd_lift(
    problem: *const WdProblem,
    reduced: *const f64,
    reduced_len: usize,
    warm: *const f64,
    warm_len: usize,
    out: *mut f64,
    out_len: usize,
) -> WdStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(null)?;
        let point = ReducedPoint(slice(reduced, reduced_len)?.to_vec());
        let warm = if warm.is_null() {
            None
        } else {
            Some(slice(warm, warm_len)?)
        };
        let z = p
            .lifter
            .lift(&point, warm, &p.projection)
            .map_err(|e| Failure::from(CliError::from(e)))?;
        write_out(z.as_slice(), out, out_len)
    })
}

/// Projects the tangent step `w` taken at `base` back onto the reduced
/// manifold; `WD_STATUS_PROJECTION_FAILED` is the oracle saying no.
#[no_mangle]
pub unsafe extern "C" fn wd_project(
    problem: *const WdProblem,
    base: *const f64,
    base_len: usize,
    w: *const f64,
    w_len: usize,
    out: *mut f64,
    out_len: usize,
) -> WdStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(null)?;
        let base = ReducedPoint(slice(base, base_len)?.to_vec());
        let w = slice(w, w_len)?;
        let frame =
            TangentFrame::new(Arc::clone(&p.constraints), base).map_err(|e| Failure::from(CliError::from(e)))?;
        if w.len() != frame.tangent_dim() {
            return Err(Failure::new(
                WdStatus::InvalidArgument,
                "DIMENSION_MISMATCH",
                format!("w needs {} entries, got {}", frame.tangent_dim(), w.len()),
            ));
        }
        let q = frame
            .project(w, &p.projection)
            .map_err(|e| Failure::from(CliError::Projection(e)))?;
        write_out(q.point.as_slice(), out, out_len)
    })
}

/// Runs descent from the problem's start point. With a null `objective`
/// the problem file's polynomial objective is used and `user_data` is
/// ignored. `cfg` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn wd_run(
    problem: *const WdProblem,
    cfg: *const WdDescentConfig,
    objective: WdObjectiveFn,
    user_data: *mut c_void,
    out: *mut *mut WdRunResult,
) -> WdStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let cfg = match cfg.as_ref() {
            None => DescentConfig::default(),
            Some(c) => DescentConfig {
                alpha0: c.alpha0,
                alpha_max: c.alpha_max,
                theta: c.theta,
                gamma: c.gamma,
                c_forcing: (c.c_forcing > 0.0).then_some(c.c_forcing),
                max_iters: c.max_iters,
                seed: c.seed,
                alpha_min: c.alpha_min,
                convergence_window: c.convergence_window,
                projection: ProjectionConfig::from(&c.projection),
            },
        };
        let polynomial = &p.problem.objective;
        let eval = |z: &[f64]| match objective {
            Some(f) => f(z.as_ptr(), z.len(), user_data),
            None => polynomial.evaluate(z),
        };
        let dp = DescentProblem {
            partition: p.problem.partition.clone(),
            objective: eval,
            start: p.problem.start.clone(),
        };
        let trace = descend(&dp, &cfg).map_err(|e| Failure::from(CliError::from(e)))?;
        *out = Box::into_raw(Box::new(WdRunResult { trace }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn wd_run_result_free(result: *mut WdRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

#[no_mangle]
pub unsafe extern "C" fn wd_run_result_iterations(result: *const WdRunResult) -> usize {
    result.as_ref().map_or(0, |r| r.trace.iterations())
}

#[no_mangle]
pub unsafe extern "C" fn wd_run_result_converged(result: *const WdRunResult) -> bool {
    result.as_ref().is_some_and(|r| r.trace.converged)
}

/// Final objective value, NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn wd_run_result_final_value(result: *const WdRunResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.trace.final_value)
}

#[no_mangle]
pub unsafe extern "C" fn wd_run_result_final_alpha(result: *const WdRunResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.trace.final_alpha)
}

#[no_mangle]
pub unsafe extern "C" fn wd_run_result_final_reduced(
    result: *const WdRunResult,
    out: *mut f64,
    out_len: usize,
) -> WdStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(null)?;
        write_out(r.trace.final_point.as_slice(), out, out_len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn wd_run_result_final_ambient(
    result: *const WdRunResult,
    out: *mut f64,
    out_len: usize,
) -> WdStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(null)?;
        write_out(r.trace.final_ambient.as_slice(), out, out_len)
    })
}

/// Summary of iteration `index`.
#[no_mangle]
pub unsafe extern "C" fn wd_run_result_record(
    result: *const WdRunResult,
    index: usize,
    out: *mut WdTraceRecord,
) -> WdStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        let rec = r.trace.records.get(index).ok_or_else(|| {
            Failure::new(
                WdStatus::InvalidArgument,
                "INDEX_OUT_OF_RANGE",
                format!("record {index} of {}", r.trace.records.len()),
            )
        })?;
        *out = WdTraceRecord {
            j: rec.j,
            alpha: rec.alpha,
            f: rec.f,
            event: match rec.event {
                PollEvent::Success => WdPollEvent::Success,
                PollEvent::Unsuccessful => WdPollEvent::Unsuccessful,
                PollEvent::Rebase => WdPollEvent::Rebase,
            },
        };
        Ok(())
    })
}

/// Reduced point kept after iteration `index`.
#[no_mangle]
pub unsafe extern "C" fn wd_run_result_point(
    result: *const WdRunResult,
    index: usize,
    out: *mut f64,
    out_len: usize,
) -> WdStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(null)?;
        let rec = r.trace.records.get(index).ok_or_else(|| {
            Failure::new(
                WdStatus::InvalidArgument,
                "INDEX_OUT_OF_RANGE",
                format!("record {index}"),
            )
        })?;
        write_out(rec.point.as_slice(), out, out_len)
    })
}

/// Machine-readable code of the last error on this thread, or null. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn wd_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |e| e.code.as_ptr()))
}

/// Human-readable message of the last error on this thread, or null.
#[no_mangle]
pub extern "C" fn wd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |e| e.message.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
