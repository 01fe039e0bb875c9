//! C ABI over `policyopt`.
//!
//! Objects are opaque handles created by `po_*_new`/`po_*_load`/`po_train`
//! and released with the matching `po_*_free`. Every fallible call returns a
//! [`PoStatus`]; on failure a message is kept per thread and can be copied
//! out with [`po_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use policyopt::cli::{train, EvalContext};
use policyopt::config::ExperimentConfig;
use policyopt::evaluation::{summarize, Controller, PolicyController};
use policyopt::policy::{MlpPolicy, ThetaFile};
use policyopt::Error;

/// Status codes. The non-zero values of config, solver and I/O failures
/// match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Solver = 3,
    Io = 4,
    InvalidArgument = 5,
    /// The call succeeded but the solver stopped short of its tolerance.
    NotConverged = 6,
    Panic = 7,
}

/// Controller selector for [`po_evaluate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoController {
    Policy = 0,
    Lqr = 1,
    Mpc = 2,
}

/// Means over the validation scenarios.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PoMetrics {
    pub performance: f64,
    pub performance_undiscounted: f64,
    pub violations: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PoTrainInfo {
    pub iterations: usize,
    pub kkt: f64,
    pub seconds: f64,
    pub converged: bool,
}

pub struct PoConfig(ExperimentConfig);

pub struct PoPolicy {
    file: ThetaFile,
    net: MlpPolicy,
}

pub struct PoEvaluator {
    config: ExperimentConfig,
    ctx: EvalContext,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> PoStatus {
    match e {
        Error::Config(_) => PoStatus::Config,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => PoStatus::InvalidArgument,
        Error::Io(_) | Error::Csv(_) | Error::Format(_) => PoStatus::Io,
        _ => PoStatus::Solver,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<PoStatus, (PoStatus, String)>) -> PoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside policyopt");
            PoStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (PoStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PoStatus, String) {
    (PoStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PoStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (PoStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PoStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (PoStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers checked `out` is non-null.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length, so a
/// call with `len == 0` sizes the buffer.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn po_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Benchmark defaults, nominal or noisy.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn po_config_benchmark(noisy: bool, out: *mut *mut PoConfig) -> PoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        boxed(out, PoConfig(ExperimentConfig::benchmark(noisy)));
        Ok(PoStatus::Ok)
    })
}

/// Parses and validates a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn po_config_from_toml(toml: *const c_char, out: *mut *mut PoConfig) -> PoStatus {
    guard(|| {
        let text = c_str(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = ExperimentConfig::from_toml_str(text).map_err(lib_err)?;
        boxed(out, PoConfig(c));
        Ok(PoStatus::Ok)
    })
}

/// Sets the training sample count, horizon and iteration cap.
///
/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn po_config_set_training(
    config: *mut PoConfig,
    samples: usize,
    horizon: usize,
    max_iter: usize,
) -> PoStatus {
    guard(|| {
        let c = &mut as_mut(config, "config")?.0;
        let mut next = c.clone();
        next.training.samples = samples;
        next.training.horizon = horizon;
        next.ipm.max_iter = max_iter;
        next.validate().map_err(lib_err)?;
        *c = next;
        Ok(PoStatus::Ok)
    })
}

/// Sets the validation scenario count, stage count and MPC horizon.
///
/// # Safety
/// `config` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn po_config_set_validation(
    config: *mut PoConfig,
    samples: usize,
    stages: usize,
    mpc_horizon: usize,
) -> PoStatus {
    guard(|| {
        let c = &mut as_mut(config, "config")?.0;
        let mut next = c.clone();
        next.validation.samples = samples;
        next.validation.stages = stages;
        next.validation.mpc_horizon = mpc_horizon;
        next.validate().map_err(lib_err)?;
        *c = next;
        Ok(PoStatus::Ok)
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn po_config_free(config: *mut PoConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Trains a policy. On `Ok` or `NotConverged` a policy handle is stored in
/// `out` (the last iterate in the latter case). `info` may be null.
///
/// # Safety
/// `config` must be a live handle, `out` a valid handle slot, `info` null
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn po_train(config: *const PoConfig, out: *mut *mut PoPolicy, info: *mut PoTrainInfo) -> PoStatus {
    guard(|| {
        let c = &as_ref(config, "config")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = train(c).map_err(lib_err)?;
        if let Some(info) = info.as_mut() {
            *info = PoTrainInfo {
                iterations: report.stats.iterations,
                kkt: report.stats.kkt,
                seconds: report.training_seconds,
                converged: report.converged(),
            };
        }
        let status = match &report.failure {
            None => PoStatus::Ok,
            Some(f) => {
                set_error(format!("solver did not converge: {f}"));
                PoStatus::NotConverged
            }
        };
        let net = report.theta.policy().map_err(lib_err)?;
        boxed(out, PoPolicy { file: report.theta, net });
        Ok(status)
    })
}

/// Loads a text or binary parameter file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn po_policy_load(path: *const c_char, out: *mut *mut PoPolicy) -> PoStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let bytes = fs::read(path).map_err(|e| lib_err(e.into()))?;
        let file = ThetaFile::read_any(&bytes).map_err(lib_err)?;
        let net = file.policy().map_err(lib_err)?;
        boxed(out, PoPolicy { file, net });
        Ok(PoStatus::Ok)
    })
}

/// Writes the parameters in the text layout.
///
/// # Safety
/// `policy` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn po_policy_save(policy: *const PoPolicy, path: *const c_char) -> PoStatus {
    guard(|| {
        let p = as_ref(policy, "policy")?;
        let path = PathBuf::from(c_str(path, "path")?);
        let mut buf = Vec::new();
        p.file.write_text(&mut buf).map_err(lib_err)?;
        fs::write(path, buf).map_err(|e| lib_err(e.into()))?;
        Ok(PoStatus::Ok)
    })
}

/// Number of parameters, or 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn po_policy_param_count(policy: *const PoPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.file.theta.len())
}

/// Copies the parameters into `buf`, which must hold exactly
/// [`po_policy_param_count`] values.
///
/// # Safety
/// `policy` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn po_policy_params(policy: *const PoPolicy, buf: *mut f64, len: usize) -> PoStatus {
    guard(|| {
        let p = as_ref(policy, "policy")?;
        if len != p.file.theta.len() {
            return Err((
                PoStatus::InvalidArgument,
                format!("buffer holds {len} values, policy has {}", p.file.theta.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(p.file.theta.as_ptr(), buf, len);
        Ok(PoStatus::Ok)
    })
}

/// `u = π_θ(x, ζ)` without saturation.
///
/// # Safety
/// `x`, `zeta` and `u` must point to `nx`, `nzeta` and `nu` doubles.
#[no_mangle]
pub unsafe extern "C" fn po_policy_act(
    policy: *const PoPolicy,
    x: *const f64,
    nx: usize,
    zeta: *const f64,
    nzeta: usize,
    u: *mut f64,
    nu: usize,
) -> PoStatus {
    guard(|| {
        let p = as_ref(policy, "policy")?;
        let x = slice(x, nx, "x")?;
        let zeta = slice(zeta, nzeta, "zeta")?;
        if nu != p.net.output_dim() {
            return Err((
                PoStatus::InvalidArgument,
                format!("output buffer holds {nu} values, policy emits {}", p.net.output_dim()),
            ));
        }
        if u.is_null() {
            return Err(null("u"));
        }
        let out = p.net.eval(&p.file.theta, x, zeta).map_err(lib_err)?;
        ptr::copy_nonoverlapping(out.as_ptr(), u, nu);
        Ok(PoStatus::Ok)
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn po_policy_free(policy: *mut PoPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Builds the validation set and the LQR and MPC baselines for `config`.
///
/// # Safety
/// `config` must be a live handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn po_evaluator_new(config: *const PoConfig, out: *mut *mut PoEvaluator) -> PoStatus {
    guard(|| {
        let c = &as_ref(config, "config")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let ctx = EvalContext::new(c).map_err(lib_err)?;
        boxed(out, PoEvaluator { config: c.clone(), ctx });
        Ok(PoStatus::Ok)
    })
}

/// Closed-loop metrics of one controller on the validation set. `policy` is
/// only read for [`PoController::Policy`] and may be null otherwise.
///
/// # Safety
/// `evaluator` must be a live handle, `policy` null or live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn po_evaluate(
    evaluator: *const PoEvaluator,
    controller: PoController,
    policy: *const PoPolicy,
    out: *mut PoMetrics,
) -> PoStatus {
    guard(|| {
        let ev = as_ref(evaluator, "evaluator")?;
        let out = as_mut(out, "out")?;
        let pc: PolicyController;
        let c: &dyn Controller = match controller {
            PoController::Lqr => &ev.ctx.lqr,
            PoController::Mpc => &ev.ctx.mpc,
            PoController::Policy => {
                let p = as_ref(policy, "policy")?;
                pc = ev.ctx.policy_controller("PO", &p.file, &ev.config).map_err(lib_err)?;
                &pc
            }
        };
        let runs = ev.ctx.run(&[c]).map_err(lib_err)?;
        let row = summarize(&c.id(), &runs[0]).map_err(lib_err)?;
        *out = PoMetrics {
            performance: row.performance,
            performance_undiscounted: row.performance_undiscounted,
            violations: row.violations,
        };
        Ok(PoStatus::Ok)
    })
}

/// # Safety
/// `evaluator` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn po_evaluator_free(evaluator: *mut PoEvaluator) {
    if !evaluator.is_null() {
        drop(Box::from_raw(evaluator));
    }
}
