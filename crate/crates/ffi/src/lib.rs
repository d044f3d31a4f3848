//! C ABI over the doa-bcs estimators.
//!
//! Handles are opaque heap objects owned by the caller and released with the
//! matching `*_free`. Every fallible call returns a [`DoaStatus`] code; the
//! message of the last failure on the calling thread is available from
//! [`doa_last_error_message`].

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use doa_bcs::array_model::{realify_matrix, stack, synthesize_snapshot, ArrayConfig, SteeringGrid, C64};
use doa_bcs::bcskf::MotionModel;
use doa_bcs::doa::{primary_doa, ThresholdConfig};
use doa_bcs::harness::runner::{trial_rng, EstimatorSettings, SequenceEstimator};
use doa_bcs::harness::EstimatorKind;
use doa_bcs::Error;
use nalgebra::{DMatrix, DVector};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DoaStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Config = 3,
    Dimension = 4,
    Numerical = 5,
    Io = 6,
    Parse = 7,
    Panic = 8,
}

/// Estimator selector for [`doa_tracker_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DoaEstimator {
    /// Zero-mean RVM inside the Kalman filter.
    Rvm = 0,
    /// Prediction-centred RVM inside the Kalman filter.
    ModifiedRvm = 1,
    /// Windowed spike-and-slab Gibbs sampler.
    Gibbs = 2,
}

/// Array geometry, coupling and angle grid.
pub struct DoaArray {
    config: ArrayConfig,
    grid: SteeringGrid,
}

/// Sequential single-target estimator bound to one array.
pub struct DoaTracker {
    a: DMatrix<f64>,
    thetas: Vec<f64>,
    antennas: usize,
    threshold: ThresholdConfig,
    estimator: SequenceEstimator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> DoaStatus {
    match err {
        Error::Domain(_) => DoaStatus::Domain,
        Error::Config(_) => DoaStatus::Config,
        Error::Dimension(_) => DoaStatus::Dimension,
        Error::Numerical(_) => DoaStatus::Numerical,
        Error::Io { .. } => DoaStatus::Io,
        Error::Parse(_) => DoaStatus::Parse,
    }
}

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), DoaStatus>) -> DoaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DoaStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            DoaStatus::Panic
        }
    }
}

fn fail(err: Error) -> DoaStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn null(what: &str) -> DoaStatus {
    set_error(format!("null pointer: {what}"));
    DoaStatus::NullPointer
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], DoaStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], DoaStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn build_array(config: ArrayConfig) -> Result<Box<DoaArray>, DoaStatus> {
    let grid = config.build().map_err(fail)?;
    Ok(Box::new(DoaArray { config, grid }))
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to fit. Returns the full message length
/// in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn doa_last_error_message(buf: *mut c_char, len: usize) -> usize {
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

/// Twenty antennas at half-wavelength spacing with the default coupling
/// and a 1° grid.
#[no_mangle]
pub unsafe extern "C" fn doa_array_new_standard(out: *mut *mut DoaArray) -> DoaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(build_array(ArrayConfig::standard())?);
        Ok(())
    })
}

/// Array from a JSON description with keys `m`, `delta_d_wavelengths`,
/// `coupling` and optionally `grid_step_deg`.
#[no_mangle]
pub unsafe extern "C" fn doa_array_from_json(json: *const c_char, out: *mut *mut DoaArray) -> DoaStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(format!("array JSON is not UTF-8: {e}"));
            DoaStatus::Parse
        })?;
        let config = ArrayConfig::from_json(text).map_err(fail)?;
        *out = Box::into_raw(build_array(config)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn doa_array_free(array: *mut DoaArray) {
    if !array.is_null() {
        drop(Box::from_raw(array));
    }
}

/// Number of antennas, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn doa_array_antennas(array: *const DoaArray) -> usize {
    array.as_ref().map_or(0, |a| a.grid.antennas())
}

/// Number of grid angles, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn doa_array_grid_len(array: *const DoaArray) -> usize {
    array.as_ref().map_or(0, |a| a.grid.len())
}

/// Grid angle in degrees at `index`, or NaN when out of range.
#[no_mangle]
pub unsafe extern "C" fn doa_array_grid_angle(array: *const DoaArray, index: usize) -> f64 {
    array
        .as_ref()
        .and_then(|a| a.grid.thetas().get(index).copied())
        .unwrap_or(f64::NAN)
}

/// Writes one noisy snapshot of a single source at grid angle `theta_deg`
/// with real amplitude `value`. Noise has variance `sigma2` on each real and
/// imaginary part and is drawn from a generator seeded by `seed`. Both
/// output buffers hold `len` values, which must equal the antenna count.
#[no_mangle]
pub unsafe extern "C" fn doa_array_synthesize(
    array: *const DoaArray,
    theta_deg: f64,
    value: f64,
    sigma2: f64,
    seed: u64,
    out_re: *mut f64,
    out_im: *mut f64,
    len: usize,
) -> DoaStatus {
    guard(|| {
        let array = array.as_ref().ok_or_else(|| null("array"))?;
        let re = slice_out(out_re, len, "out_re")?;
        let im = slice_out(out_im, len, "out_im")?;
        if len != array.grid.antennas() {
            return Err(fail(Error::Dimension(format!(
                "buffers hold {len} values, array has {} antennas",
                array.grid.antennas()
            ))));
        }
        let idx = array
            .grid
            .index_of(theta_deg)
            .filter(|&i| (array.grid.thetas()[i] - theta_deg).abs() < 1e-9)
            .ok_or_else(|| fail(Error::Domain(format!("{theta_deg}° is not a grid angle"))))?;
        let mut x = DVector::zeros(array.grid.len());
        x[idx] = C64::new(value, 0.0);
        let mut rng = trial_rng(seed, 0, 0);
        let snap = synthesize_snapshot(&array.grid, &x, sigma2, &mut rng).map_err(fail)?;
        for (m, v) in snap.y.iter().enumerate() {
            re[m] = v.re;
            im[m] = v.im;
        }
        Ok(())
    })
}

/// Creates a tracker for `array`. `delta_deg` is the assumed per-snapshot
/// DOA change, `sigma2_init` the initial noise variance, `eta` the retained
/// energy fraction and `seed` keys the Gibbs sampler's random stream. The
/// tracker copies what it needs, so `array` may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn doa_tracker_new(
    array: *const DoaArray,
    estimator: DoaEstimator,
    delta_deg: f64,
    sigma2_init: f64,
    eta: f64,
    seed: u64,
    out: *mut *mut DoaTracker,
) -> DoaStatus {
    guard(|| {
        let array = array.as_ref().ok_or_else(|| null("array"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(sigma2_init > 0.0) {
            return Err(fail(Error::Config(format!(
                "sigma2_init must be positive, got {sigma2_init}"
            ))));
        }
        let threshold = ThresholdConfig::new(eta).map_err(fail)?;
        let motion = MotionModel::from_degrees(delta_deg, array.config.grid_step_deg).map_err(fail)?;
        let kind = match estimator {
            DoaEstimator::Rvm => EstimatorKind::Rvm,
            DoaEstimator::ModifiedRvm => EstimatorKind::Mrvm,
            DoaEstimator::Gibbs => EstimatorKind::Gibbs,
        };
        let settings = EstimatorSettings {
            threshold,
            ..Default::default()
        };
        let tracker = DoaTracker {
            a: realify_matrix(array.grid.effective()),
            thetas: array.grid.thetas().to_vec(),
            antennas: array.grid.antennas(),
            threshold,
            estimator: SequenceEstimator::new(kind, motion, &settings, sigma2_init, trial_rng(seed, 0, 1)),
        };
        *out = Box::into_raw(Box::new(tracker));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn doa_tracker_free(tracker: *mut DoaTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Feeds one complex snapshot (`len` antennas, split into real and
/// imaginary parts). On success `out_doa` receives the strongest retained
/// angle in degrees (NaN when nothing is retained) and `out_count`, when
/// non-null, the number of retained angles.
#[no_mangle]
pub unsafe extern "C" fn doa_tracker_step(
    tracker: *mut DoaTracker,
    re: *const f64,
    im: *const f64,
    len: usize,
    out_doa: *mut f64,
    out_count: *mut usize,
) -> DoaStatus {
    guard(|| {
        let tracker = tracker.as_mut().ok_or_else(|| null("tracker"))?;
        let re = slice_in(re, len, "re")?;
        let im = slice_in(im, len, "im")?;
        if out_doa.is_null() {
            return Err(null("out_doa"));
        }
        if len != tracker.antennas {
            return Err(fail(Error::Dimension(format!(
                "snapshot has {len} entries, array has {} antennas",
                tracker.antennas
            ))));
        }
        let y = DVector::from_iterator(len, re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)));
        let est = tracker
            .estimator
            .step(&tracker.a, &stack(&y), &tracker.thetas, tracker.threshold)
            .map_err(fail)?;
        *out_doa = primary_doa(&est).unwrap_or(f64::NAN);
        if !out_count.is_null() {
            *out_count = est.source_count();
        }
        Ok(())
    })
}
