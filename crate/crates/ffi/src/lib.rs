//! C ABI over the queuekit engine.
//!
//! Every function returns a [`QkStatus`]; on failure the message is available
//! from [`qk_last_error`] on the same thread until the next call.
//!
//! Pointer arguments may be null, which is reported as
//! [`QkStatus::NullPointer`]. Non-null pointers must be valid and properly
//! aligned for the pointee, arrays must hold the stated length, strings
//! must be NUL-terminated, and handles must come from the matching
//! constructor and not have been freed.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use queuekit::cli::{self, report, Mode, ModelFile, RunOptions};
use queuekit::polling::{self, Policy, PollingQueue, PollingSpec};
use queuekit::queues::{self, PerformanceMetrics, QueueModel};
use queuekit::sim::{self, QueueSim, SimConfig, SimEstimate};
use queuekit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unstable = 3,
    NotErgodic = 4,
    Numerical = 5,
    Parse = 6,
    Schema = 7,
    Unsupported = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkQueueKind {
    Mm1 = 0,
    MmInf = 1,
    MmM = 2,
    MmMm = 3,
    Mg1 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkPolicy {
    Exhaustive = 0,
    Gated = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkMode {
    Analyze = 0,
    Simulate = 1,
    Validate = 2,
}

/// Stationary metrics; fields that do not apply to the model are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkMetrics {
    pub rho: f64,
    pub u: f64,
    pub l: f64,
    pub lq: f64,
    pub ls: f64,
    pub w: f64,
    pub wq: f64,
    pub ws: f64,
    pub pi0: f64,
    pub effective_arrival: f64,
    pub blocking: f64,
    pub delay_prob: f64,
    pub var_n: f64,
}

/// Point estimate with its 95% half-width.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkEstimate {
    pub point: f64,
    pub half_width: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkQueueEstimates {
    pub l: QkEstimate,
    pub lq: QkEstimate,
    pub w: QkEstimate,
    pub wq: QkEstimate,
    pub pi0: QkEstimate,
    pub throughput: QkEstimate,
}

/// Opaque single-station queue model.
pub struct QkQueue {
    model: QueueModel,
}

/// Opaque cyclic polling system.
pub struct QkPolling {
    spec: PollingSpec,
}

/// Opaque validated model file.
pub struct QkModel {
    file: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> QkStatus {
    match e {
        Error::Validation(_) | Error::DimensionMismatch { .. } | Error::Domain(_) => QkStatus::InvalidArgument,
        Error::Unstable { .. } => QkStatus::Unstable,
        Error::Reducible { .. } | Error::NotErgodic(_) => QkStatus::NotErgodic,
        Error::Singular { .. } | Error::NonConvergence { .. } | Error::TailTooLarge { .. } => QkStatus::Numerical,
        Error::Unsupported(_) => QkStatus::Unsupported,
        Error::Schema(_) => QkStatus::Schema,
        Error::Parse(_) => QkStatus::Parse,
        Error::Io(_) => QkStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> QkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QkStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QkStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            QkStatus::InvalidArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            QkStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: non-null handles were produced by the matching constructor.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: caller guarantees `n` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

impl From<&PerformanceMetrics> for QkMetrics {
    fn from(m: &PerformanceMetrics) -> Self {
        QkMetrics {
            rho: m.rho,
            u: nan_or(m.u),
            l: m.l,
            lq: m.lq,
            ls: m.ls,
            w: m.w,
            wq: m.wq,
            ws: m.ws,
            pi0: m.pi0,
            effective_arrival: m.effective_arrival,
            blocking: nan_or(m.blocking),
            delay_prob: nan_or(m.delay_prob),
            var_n: nan_or(m.var_n),
        }
    }
}

impl From<&SimEstimate> for QkEstimate {
    fn from(e: &SimEstimate) -> Self {
        QkEstimate { point: e.point, half_width: e.half_width_95 }
    }
}

/// Message for the last failed call on this thread, or null.
///
/// The pointer stays valid until the next queuekit call on this thread.
#[no_mangle]
pub extern "C" fn qk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a queue model. `m` is used by the multi-server kinds, `es` and
/// `es2` (service-time moments) by M/G/1, `delta` by the rest.
#[no_mangle]
pub unsafe extern "C" fn qk_queue_new(
    kind: QkQueueKind,
    beta: f64,
    delta: f64,
    m: usize,
    es: f64,
    es2: f64,
    out_queue: *mut *mut QkQueue,
) -> QkStatus {
    guard(|| {
        let slot = out(out_queue, "out_queue")?;
        *slot = ptr::null_mut();
        let model = match kind {
            QkQueueKind::Mm1 => QueueModel::MM1 { beta, delta },
            QkQueueKind::MmInf => QueueModel::MMInf { beta, delta },
            QkQueueKind::MmM => QueueModel::MMm { beta, delta, m },
            QkQueueKind::MmMm => QueueModel::MMmm { beta, delta, m },
            QkQueueKind::Mg1 => QueueModel::MG1 { beta, es, es2 },
        };
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Fail::Arg(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("beta", beta)?;
        if kind == QkQueueKind::Mg1 {
            positive("es", es)?;
            if !(es2.is_finite() && es2 >= es * es * (1.0 - 1e-12)) {
                return Err(Fail::Arg("es2 must be at least es^2".into()));
            }
        } else {
            positive("delta", delta)?;
        }
        if matches!(kind, QkQueueKind::MmM | QkQueueKind::MmMm) && m == 0 {
            return Err(Fail::Arg("m must be at least 1".into()));
        }
        *slot = Box::into_raw(Box::new(QkQueue { model }));
        Ok(())
    })
}

/// Stationary metrics. Fails with `QK_STATUS_UNSTABLE` when the load is at
/// or above capacity.
#[no_mangle]
pub unsafe extern "C" fn qk_queue_metrics(queue: *const QkQueue, out_metrics: *mut QkMetrics) -> QkStatus {
    guard(|| {
        let q = handle(queue, "queue")?;
        let slot = out(out_metrics, "out_metrics")?;
        *slot = QkMetrics::from(&q.model.metrics()?);
        Ok(())
    })
}

/// `P(W <= t)` and `P(Wq <= t)` for M/M/1 and M/M/m.
#[no_mangle]
pub unsafe extern "C" fn qk_queue_waiting_cdf(queue: *const QkQueue, t: f64, out_w: *mut f64, out_wq: *mut f64) -> QkStatus {
    guard(|| {
        let q = handle(queue, "queue")?;
        let (w, wq) = queues::waiting_time_cdf(&q.model, t)?;
        *out(out_w, "out_w")? = w;
        *out(out_wq, "out_wq")? = wq;
        Ok(())
    })
}

/// Simulates `horizon` departures (warmup 20%, 32 batches) from `seed`.
#[no_mangle]
pub unsafe extern "C" fn qk_queue_simulate(queue: *const QkQueue, seed: u64, horizon: u64, out_estimates: *mut QkQueueEstimates) -> QkStatus {
    guard(|| {
        let q = handle(queue, "queue")?;
        let slot = out(out_estimates, "out_estimates")?;
        let cfg = SimConfig { seed, horizon, ..Default::default() };
        let e = sim::simulate_single_queue(&QueueSim::from_model(&q.model)?, &cfg)?;
        *slot = QkQueueEstimates {
            l: (&e.l).into(),
            lq: (&e.lq).into(),
            w: (&e.w).into(),
            wq: (&e.wq).into(),
            pi0: (&e.pi0).into(),
            throughput: (&e.throughput).into(),
        };
        Ok(())
    })
}

/// Releases a queue; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qk_queue_free(queue: *mut QkQueue) {
    if !queue.is_null() {
        // SAFETY: produced by `qk_queue_new` and not yet freed.
        drop(unsafe { Box::from_raw(queue) });
    }
}

/// Erlang loss probability `B(m, rho)`.
#[no_mangle]
pub unsafe extern "C" fn qk_erlang_b(m: usize, rho: f64, out_value: *mut f64) -> QkStatus {
    guard(|| {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Fail::Arg(format!("rho must be positive, got {rho}")));
        }
        *out(out_value, "out_value")? = queues::erlang_b(m, rho);
        Ok(())
    })
}

/// Erlang delay probability `C(m, rho)`; requires `rho < m`.
#[no_mangle]
pub unsafe extern "C" fn qk_erlang_c(m: usize, rho: f64, out_value: *mut f64) -> QkStatus {
    guard(|| {
        *out(out_value, "out_value")? = queues::erlang_c(m, rho)?;
        Ok(())
    })
}

/// Creates a cyclic polling system of `n` queues from per-queue arrival
/// rates and first/second moments of service and switchover times.
#[no_mangle]
pub unsafe extern "C" fn qk_polling_new(
    n: usize,
    lambda: *const f64,
    b1: *const f64,
    b2: *const f64,
    s1: *const f64,
    s2: *const f64,
    out_polling: *mut *mut QkPolling,
) -> QkStatus {
    guard(|| {
        let slot = out(out_polling, "out_polling")?;
        *slot = ptr::null_mut();
        let (lambda, b1, b2) = (slice(lambda, n, "lambda")?, slice(b1, n, "b1")?, slice(b2, n, "b2")?);
        let (s1, s2) = (slice(s1, n, "s1")?, slice(s2, n, "s2")?);
        let queues = (0..n)
            .map(|i| PollingQueue { lambda: lambda[i], b1: b1[i], b2: b2[i], s1: s1[i], s2: s2[i] })
            .collect();
        let spec = PollingSpec::new(queues)?;
        *slot = Box::into_raw(Box::new(QkPolling { spec }));
        Ok(())
    })
}

fn policy(p: QkPolicy) -> Policy {
    match p {
        QkPolicy::Exhaustive => Policy::Exhaustive,
        QkPolicy::Gated => Policy::Gated,
    }
}

/// Mean waits into `out_waits`, which must hold `len` = number of queues.
#[no_mangle]
pub unsafe extern "C" fn qk_polling_waits(polling: *const QkPolling, discipline: QkPolicy, out_waits: *mut f64, len: usize) -> QkStatus {
    guard(|| {
        let p = handle(polling, "polling")?;
        if out_waits.is_null() {
            return Err(Fail::Null("out_waits"));
        }
        if len != p.spec.len() {
            return Err(Error::DimensionMismatch { expected: p.spec.len(), got: len }.into());
        }
        let w = polling::mean_waits(&p.spec, policy(discipline))?;
        // SAFETY: caller guarantees `len` writable doubles.
        unsafe { std::slice::from_raw_parts_mut(out_waits, len) }.copy_from_slice(&w);
        Ok(())
    })
}

/// Pseudo-conservation residual of the analytic waits.
#[no_mangle]
pub unsafe extern "C" fn qk_polling_pcl_residual(polling: *const QkPolling, discipline: QkPolicy, out_residual: *mut f64) -> QkStatus {
    guard(|| {
        let p = handle(polling, "polling")?;
        let slot = out(out_residual, "out_residual")?;
        *slot = polling::analyze(&p.spec, policy(discipline))?.pcl_residual;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qk_polling_free(polling: *mut QkPolling) {
    if !polling.is_null() {
        // SAFETY: produced by `qk_polling_new` and not yet freed.
        drop(unsafe { Box::from_raw(polling) });
    }
}

/// Parses and validates a JSON model file held in `json`.
#[no_mangle]
pub unsafe extern "C" fn qk_model_parse(json: *const c_char, out_model: *mut *mut QkModel) -> QkStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        // SAFETY: caller passes a NUL-terminated string.
        let text = unsafe { CStr::from_ptr(json) }.to_str().map_err(|e| Error::Parse(e.to_string()))?;
        let file = cli::parse_model_str(text)?;
        *slot = Box::into_raw(Box::new(QkModel { file }));
        Ok(())
    })
}

/// Runs a model file and returns the canonical JSON report in `out_report`
/// (free with [`qk_string_free`]) and the CLI exit code in `out_exit`.
/// `horizon == 0` and `tolerance <= 0` select the file or built-in defaults.
#[no_mangle]
pub unsafe extern "C" fn qk_model_run(
    model: *const QkModel,
    mode: QkMode,
    seed: u64,
    horizon: u64,
    tolerance: f64,
    out_report: *mut *mut c_char,
    out_exit: *mut i32,
) -> QkStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let report_slot = out(out_report, "out_report")?;
        *report_slot = ptr::null_mut();
        let exit_slot = out(out_exit, "out_exit")?;
        let opts = RunOptions {
            seed: Some(seed),
            horizon: (horizon > 0).then_some(horizon),
            tolerance: if tolerance > 0.0 { tolerance } else { cli::DEFAULT_TOLERANCE },
            perturb: 0.0,
        };
        opts.sim_config(&m.file).validate()?;
        let mode = match mode {
            QkMode::Analyze => Mode::Analyze,
            QkMode::Simulate => Mode::Simulate,
            QkMode::Validate => Mode::Validate,
        };
        let run = cli::run(&m.file, mode, &opts);
        let text = report::to_canonical_json(&run.report)?;
        *report_slot = CString::new(text).map_err(|e| Error::Parse(e.to_string()))?.into_raw();
        *exit_slot = run.exit_code();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn qk_model_free(model: *mut QkModel) {
    if !model.is_null() {
        // SAFETY: produced by `qk_model_parse` and not yet freed.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Releases a string returned by this library; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qk_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw` in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}
