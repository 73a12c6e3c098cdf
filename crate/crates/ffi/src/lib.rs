//! C interface to the rl-lab run-length engines.
//!
//! Charts are opaque `RlChart` handles created by the `rl_*_new`
//! constructors and released with `rl_chart_free`. Every fallible call
//! returns an `RlStatus`; on failure the message is kept per thread and
//! can be copied out with `rl_last_error`. Optional limits (`k2`) are
//! passed as NaN when absent. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rl_lab::calib::{self, CalibrationTarget};
use rl_lab::classic::{CusumSpec, EwmaSpec, LimitStyle, ShewhartSpec};
use rl_lab::synth::{SyntheticSpec, Variant};
use rl_lab::{ChartSpec, Error, Measure};

/// Opaque chart handle.
pub struct RlChart {
    spec: ChartSpec,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    /// Solver, eigen-iteration or calibration failure.
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlMeasure {
    ZeroState = 0,
    SteadyState = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlLimits {
    Exact = 0,
    Fixed = 1,
}

impl From<RlMeasure> for Measure {
    fn from(m: RlMeasure) -> Self {
        match m {
            RlMeasure::ZeroState => Measure::ZeroState,
            RlMeasure::SteadyState => Measure::SteadyState,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => RlStatus::InvalidParameter,
        _ => RlStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic for `rl_last_error`.
fn guard<F>(f: F) -> RlStatus
where
    F: FnOnce() -> Result<(), (RlStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err((status, msg))) => {
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
            RlStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (RlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (RlStatus, String) {
    (RlStatus::NullPointer, format!("`{name}` is null"))
}

fn optional(x: f64) -> Option<f64> {
    (!x.is_nan()).then_some(x)
}

unsafe fn emit(spec: ChartSpec, out: *mut *mut RlChart) -> Result<(), (RlStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    spec.validate().map_err(lib_err)?;
    *out = Box::into_raw(Box::new(RlChart { spec }));
    Ok(())
}

/// Synthetic chart with rule `variant` (1-4), window `h` and warning limit
/// `k1`; `k2` adds an outer Shewhart limit (NaN for none).
///
/// # Safety
/// `out` must be null or valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_synthetic_new(variant: u8, head_start: bool, h: usize, k1: f64, k2: f64, out: *mut *mut RlChart) -> RlStatus {
    guard(|| {
        let v = Variant::from_number(variant).map_err(lib_err)?;
        let mut s = SyntheticSpec::new(v, head_start, h, k1);
        s.k2 = optional(k2);
        emit(ChartSpec::Synthetic(s), out)
    })
}

/// EWMA chart; `grid` of 0 keeps the default discretization.
///
/// # Safety
/// `out` must be null or valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_ewma_new(lambda: f64, c: f64, limits: RlLimits, k2: f64, grid: usize, out: *mut *mut RlChart) -> RlStatus {
    guard(|| {
        let style = match limits {
            RlLimits::Exact => LimitStyle::Exact,
            RlLimits::Fixed => LimitStyle::Fixed,
        };
        let mut s = EwmaSpec::new(lambda, c, style);
        s.k2 = optional(k2);
        if grid > 0 {
            s.n_grid = grid;
        }
        emit(ChartSpec::Ewma(s), out)
    })
}

/// Upper CUSUM chart; `grid` of 0 keeps the default discretization.
///
/// # Safety
/// `out` must be null or valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_cusum_new(k_ref: f64, h: f64, k2: f64, grid: usize, out: *mut *mut RlChart) -> RlStatus {
    guard(|| {
        let mut s = CusumSpec::new(k_ref, h);
        s.k2 = optional(k2);
        if grid > 0 {
            s.n_grid = grid;
        }
        emit(ChartSpec::Cusum(s), out)
    })
}

/// # Safety
/// `out` must be null or valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn rl_shewhart_new(k: f64, out: *mut *mut RlChart) -> RlStatus {
    guard(|| emit(ChartSpec::Shewhart(ShewhartSpec::new(k)), out))
}

/// # Safety
/// `chart` must be null or a handle from an `rl_*_new` call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_chart_free(chart: *mut RlChart) {
    if !chart.is_null() {
        drop(Box::from_raw(chart));
    }
}

/// Current value of the chart's free parameter (k1, c, h or k).
///
/// # Safety
/// `chart` must be a live handle or null; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_chart_parameter(chart: *const RlChart, out: *mut f64) -> RlStatus {
    guard(|| {
        let chart = chart.as_ref().ok_or_else(|| null("chart"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = chart.spec.parameter(chart.spec.default_free_param()).map_err(lib_err)?;
        Ok(())
    })
}

/// Zero-state or steady-state ARL at shift `delta`.
///
/// # Safety
/// `chart` must be a live handle or null; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_chart_arl(chart: *const RlChart, delta: f64, measure: RlMeasure, out: *mut f64) -> RlStatus {
    guard(|| {
        let chart = chart.as_ref().ok_or_else(|| null("chart"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = chart.spec.arl(delta, measure.into()).map_err(lib_err)?;
        Ok(())
    })
}

/// Writes `D_1 .. D_tau_max` into `values` (capacity `capacity`), the
/// number written into `written` and the limit into `limit`. Fewer than
/// `tau_max` values are written if the in-control survival underflows.
///
/// # Safety
/// `chart` must be a live handle or null; `values` must be null or valid
/// for `capacity` doubles; `written` and `limit` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_chart_ced(
    chart: *const RlChart,
    delta: f64,
    tau_max: usize,
    values: *mut f64,
    capacity: usize,
    written: *mut usize,
    limit: *mut f64,
) -> RlStatus {
    guard(|| {
        let chart = chart.as_ref().ok_or_else(|| null("chart"))?;
        let written = written.as_mut().ok_or_else(|| null("written"))?;
        let limit = limit.as_mut().ok_or_else(|| null("limit"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        if capacity < tau_max {
            return Err((RlStatus::BufferTooSmall, format!("capacity {capacity} < tau_max {tau_max}")));
        }
        let p = chart.spec.ced(delta, tau_max).map_err(lib_err)?;
        ptr::copy_nonoverlapping(p.values.as_ptr(), values, p.values.len());
        *written = p.values.len();
        *limit = p.limit;
        Ok(())
    })
}

/// Solves the free parameter so that the in-control ARL under `measure`
/// equals `arl0`, updates the chart in place and writes the value to `out`
/// (which may be null).
///
/// # Safety
/// `chart` must be a live handle or null; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rl_chart_calibrate(chart: *mut RlChart, arl0: f64, measure: RlMeasure, out: *mut f64) -> RlStatus {
    guard(|| {
        let chart = chart.as_mut().ok_or_else(|| null("chart"))?;
        let target = CalibrationTarget::zero_state(arl0).with_measure(measure.into());
        let c = calib::calibrate(&chart.spec, &target).map_err(lib_err)?;
        chart.spec = chart.spec.with_parameter(c.param, c.value).map_err(lib_err)?;
        if let Some(out) = out.as_mut() {
            *out = c.value;
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf` and returns the length it needs including
/// the NUL, or 0 if no error has been recorded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn rl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
