//! C ABI over `qcrl`.
//!
//! Every fallible call returns a [`QcrlStatus`]; on failure the message is kept
//! per thread and can be copied out with [`qcrl_last_error_message`]. Models
//! and traversals are opaque handles released with their `_free` function.
//! Parameter buffers are flat, all controls concatenated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qcrl::dynamics::{noisy_propagate, propagate};
use qcrl::gradients::{values, ScalarFunctional};
use qcrl::levelset::{
    optimize_beginning, ripv_run, BeginningWeights, Constraint, PulseInterpolator, StopCriteria, Traversal,
    TraversalConfig, TraversalProblem,
};
use qcrl::models::{default_basis, preset, Preset};
use qcrl::operators::gate_fidelity;
use qcrl::robustness::{integral_robustness, robustness_order_n, susceptibility_report, NoiseDistribution, NoiseLaw};
use qcrl::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DimensionMismatch = 4,
    BufferTooSmall = 5,
    /// Non-Hermitian or non-unitary matrix, or an ambiguous logarithm branch.
    Numerical = 6,
    IrregularPoint = 7,
    StepDeviation = 8,
    MaxIters = 9,
    OutOfRange = 10,
    NoDescent = 11,
    Unsupported = 12,
    /// A Rust panic was caught at the boundary.
    Panic = 99,
}

/// A model preset with the default 9-term Fourier basis per control.
pub struct QcrlModel {
    preset: Preset,
}

/// A finished traversal together with its interpolant.
pub struct QcrlTraversal {
    traversal: Traversal,
    interp: PulseInterpolator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Fail(QcrlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } | Error::ParamLength { .. } => QcrlStatus::DimensionMismatch,
            Error::NotHermitian(_) | Error::NotUnitary(_) | Error::BranchAmbiguity => QcrlStatus::Numerical,
            Error::IrregularPoint { .. } => QcrlStatus::IrregularPoint,
            Error::StepDeviation { .. } => QcrlStatus::StepDeviation,
            Error::MaxItersExceeded(_) => QcrlStatus::MaxIters,
            Error::OutOfRange { .. } => QcrlStatus::OutOfRange,
            Error::NoDescent { .. } => QcrlStatus::NoDescent,
            Error::Unsupported(_) => QcrlStatus::Unsupported,
            Error::Invalid(_) => QcrlStatus::InvalidArgument,
        };
        Fail(status, e.to_string())
    }
}

fn fail(status: QcrlStatus, msg: impl Into<String>) -> Fail {
    Fail(status, msg.into())
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QcrlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QcrlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QcrlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(QcrlStatus::NullPointer, format!("`{what}` is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(QcrlStatus::NullPointer, format!("`{what}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(QcrlStatus::NullPointer, format!("`{what}` is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(fail(QcrlStatus::NullPointer, format!("`{what}` is null")));
    }
    p.write(v);
    Ok(())
}

fn need(len: usize, want: usize, what: &str) -> Result<(), Fail> {
    if len < want {
        return Err(fail(QcrlStatus::BufferTooSmall, format!("`{what}` holds {len} values, {want} needed")));
    }
    Ok(())
}

impl QcrlModel {
    fn params<'a>(&self, p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
        let params = unsafe { slice(p, len, "params")? };
        self.preset.model.check_params(params)?;
        Ok(params)
    }

    fn theta(&self, params: &[f64], nt: usize) -> Result<f64, Fail> {
        let f = ScalarFunctional::Theta(self.preset.axis.clone());
        Ok(values(&self.preset.model, &[f], params, nt, None)?.values[0])
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qcrl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL. Zero after a successful call.
#[no_mangle]
pub extern "C" fn qcrl_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qcrl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds `sq_x_z`, `sq_xy_xyz` or `tq_xy_detuning`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcrl_model_new(name: *const c_char, out: *mut *mut QcrlModel) -> QcrlStatus {
    guard(|| {
        if name.is_null() {
            return Err(fail(QcrlStatus::NullPointer, "`name` is null"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|e| fail(QcrlStatus::InvalidUtf8, e.to_string()))?;
        let preset = preset(name, &default_basis())?;
        write(out, Box::into_raw(Box::new(QcrlModel { preset })), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from [`qcrl_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcrl_model_free(model: *mut QcrlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of pulse parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcrl_model_param_count(model: *const QcrlModel) -> usize {
    model.as_ref().map_or(0, |m| m.preset.model.n_params())
}

/// Number of noise terms, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcrl_model_noise_count(model: *const QcrlModel) -> usize {
    model.as_ref().map_or(0, |m| m.preset.model.noises().len())
}

/// Gate time `T`, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcrl_model_gate_time(model: *const QcrlModel) -> f64 {
    model.as_ref().map_or(0.0, |m| m.preset.model.gate_time())
}

/// Rotation angle on the model's gate axis.
///
/// # Safety
/// `model` must be a live handle, `params` must hold `n_params` values and
/// `theta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcrl_gate_angle(
    model: *const QcrlModel,
    params: *const f64,
    n_params: usize,
    nt: usize,
    theta: *mut f64,
) -> QcrlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = m.params(params, n_params)?;
        write(theta, m.theta(p, nt)?, "theta")
    })
}

/// `S1` and `S2` for every noise term, in model order. Either output may be
/// null to skip it; a non-null one must hold `len >= noise count` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn qcrl_susceptibilities(
    model: *const QcrlModel,
    params: *const f64,
    n_params: usize,
    nt: usize,
    s1: *mut f64,
    s2: *mut f64,
    len: usize,
) -> QcrlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = m.params(params, n_params)?;
        let n = m.preset.model.noises().len();
        need(len, n, "s1/s2")?;
        let traj = propagate(&m.preset.model, p, nt)?;
        let report = susceptibility_report(&traj, &m.preset.model, qcrl::operators::NormKind::Frobenius)?;
        if !s1.is_null() {
            slice_mut(s1, n, "s1")?.copy_from_slice(&report.s1());
        }
        if !s2.is_null() {
            slice_mut(s2, n, "s2")?.copy_from_slice(&report.s2());
        }
        Ok(())
    })
}

/// `log10 T - log10(Sn) / n`; `+inf` when `sn == 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcrl_robustness_order_n(gate_time: f64, n: u32, sn: f64, out: *mut f64) -> QcrlStatus {
    guard(|| write(out, robustness_order_n(gate_time, n, sn)?.value(), "out"))
}

/// `1 - F` between the noiseless and noisy propagators, one strength per
/// noise term.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn qcrl_infidelity(
    model: *const QcrlModel,
    params: *const f64,
    n_params: usize,
    deltas: *const f64,
    n_deltas: usize,
    nt: usize,
    out: *mut f64,
) -> QcrlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = m.params(params, n_params)?;
        let d = slice(deltas, n_deltas, "deltas")?;
        let ideal = propagate(&m.preset.model, p, nt)?.final_unitary();
        let noisy = noisy_propagate(&m.preset.model, p, d, nt)?;
        write(out, (1.0 - gate_fidelity(&ideal, &noisy)?).clamp(0.0, 1.0), "out")
    })
}

/// Monte-Carlo mean fidelity with every noise strength uniform on
/// `[-half_widths[j], half_widths[j]]`. Deterministic for a given seed.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn qcrl_integral_robustness_uniform(
    model: *const QcrlModel,
    params: *const f64,
    n_params: usize,
    half_widths: *const f64,
    n_widths: usize,
    samples: usize,
    seed: u64,
    nt: usize,
    out: *mut f64,
) -> QcrlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = m.params(params, n_params)?;
        let b = slice(half_widths, n_widths, "half_widths")?;
        let dist = NoiseDistribution { laws: b.iter().map(|&b| NoiseLaw::Uniform { b }).collect(), samples, seed };
        write(out, integral_robustness(&m.preset.model, p, &dist, nt)?, "out")
    })
}

/// Minimizes the summed `S1^2` (and undesired rotations, for presets that
/// have them) from `init` until every `S1 <= s1_target`. The best point is
/// written to `params_out` either way; `converged` reports whether the target
/// was met.
///
/// # Safety
/// Pointers must be valid for `n_params` values; `converged` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn qcrl_optimize_beginning(
    model: *const QcrlModel,
    init: *const f64,
    n_params: usize,
    s1_target: f64,
    max_iters: usize,
    nt: usize,
    params_out: *mut f64,
    converged: *mut bool,
) -> QcrlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = m.params(init, n_params)?;
        let out_buf = slice_mut(params_out, n_params, "params_out")?;
        let w_undesired = if m.preset.undesired.is_empty() { 0.0 } else { 100.0 };
        let weights = BeginningWeights { w1: 1.0, w2: 0.0, w_undesired };
        let stop = StopCriteria { land_fraction: Some(0.95), ..StopCriteria::new(s1_target, max_iters) };
        let res = optimize_beginning(&m.preset.model, p, &m.preset.undesired, &weights, &stop, nt)?;
        out_buf.copy_from_slice(&res.params);
        write(converged, res.converged, "converged")
    })
}

/// Walks the level set through `params` from its own angle out to both ends
/// of `[theta_lo, theta_hi]` in steps of `|dtheta|`. Holds `S1` of every noise
/// term, `S2` as well when `hold_s2`, and the undesired rotations of presets
/// that have them.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn qcrl_traverse(
    model: *const QcrlModel,
    params: *const f64,
    n_params: usize,
    dtheta: f64,
    theta_lo: f64,
    theta_hi: f64,
    hold_s2: bool,
    nt: usize,
    out: *mut *mut QcrlTraversal,
) -> QcrlStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = m.params(params, n_params)?;
        if out.is_null() {
            return Err(fail(QcrlStatus::NullPointer, "`out` is null"));
        }
        let pr = &m.preset;
        let mut constraints = Vec::new();
        for n in pr.model.noises() {
            constraints
                .push(Constraint { label: format!("s1_{}", n.label), functional: ScalarFunctional::S1(n.op.clone()) });
        }
        if hold_s2 {
            for n in pr.model.noises() {
                constraints.push(Constraint {
                    label: format!("s2_{}", n.label),
                    functional: ScalarFunctional::S2(n.op.clone()),
                });
            }
        }
        for (op, label) in pr.undesired.iter().zip(&pr.undesired_labels) {
            constraints.push(Constraint {
                label: format!("vartheta_{label}"),
                functional: ScalarFunctional::Undesired(op.clone()),
            });
        }
        let problem = TraversalProblem {
            model: &pr.model,
            axis: pr.axis.clone(),
            undesired: pr.undesired.clone(),
            constraints,
            nt,
        };
        let traversal = ripv_run(&problem, p, &TraversalConfig::new(dtheta, [theta_lo, theta_hi]))
            .map_err(|e| Fail::from(e.source.clone()).with_context(e.records.len()))?;
        let interp = PulseInterpolator::new(&traversal.records)?;
        write(out, Box::into_raw(Box::new(QcrlTraversal { traversal, interp })), "out")
    })
}

impl Fail {
    fn with_context(self, records: usize) -> Fail {
        Fail(self.0, format!("{} (after {records} records)", self.1))
    }
}

/// # Safety
/// `t` must be null or a handle from [`qcrl_traverse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcrl_traversal_free(t: *mut QcrlTraversal) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of records, sorted by increasing angle; 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcrl_traversal_len(t: *const QcrlTraversal) -> usize {
    t.as_ref().map_or(0, |t| t.traversal.records.len())
}

/// Angle and parameters of record `index`. `params_out` may be null.
///
/// # Safety
/// `theta` must be writable; a non-null `params_out` must hold `n_params` values.
#[no_mangle]
pub unsafe extern "C" fn qcrl_traversal_record(
    t: *const QcrlTraversal,
    index: usize,
    theta: *mut f64,
    params_out: *mut f64,
    n_params: usize,
) -> QcrlStatus {
    guard(|| {
        let t = deref(t, "traversal")?;
        let records = &t.traversal.records;
        let r = records
            .get(index)
            .ok_or_else(|| fail(QcrlStatus::InvalidArgument, format!("record {index} of {}", records.len())))?;
        if !params_out.is_null() {
            need(n_params, r.params.len(), "params_out")?;
            slice_mut(params_out, r.params.len(), "params_out")?.copy_from_slice(&r.params);
        }
        write(theta, r.theta, "theta")
    })
}

/// Parameters at an arbitrary angle inside the recorded range.
///
/// # Safety
/// `params_out` must hold `n_params` values.
#[no_mangle]
pub unsafe extern "C" fn qcrl_traversal_interpolate(
    t: *const QcrlTraversal,
    theta: f64,
    params_out: *mut f64,
    n_params: usize,
) -> QcrlStatus {
    guard(|| {
        let t = deref(t, "traversal")?;
        let p = t.interp.eval(theta)?;
        need(n_params, p.len(), "params_out")?;
        slice_mut(params_out, p.len(), "params_out")?.copy_from_slice(&p);
        Ok(())
    })
}
