//! C ABI over the batchlens core: proposed-score computation, top-k
//! selection and pivot calibration, bound to an opaque session handle that
//! owns a selector configuration and the current pivot.
//!
//! Every function returns a [`BatchlensStatus`]. On failure the message is
//! available from [`batchlens_last_error`] on the same thread. Panics never
//! cross the boundary; they surface as `BATCHLENS_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use batchlens::calibration::{estimate_pivot_with, CalibrationParams};
use batchlens::complexity::Weights;
use batchlens::imaging::{ImageTensor, MaskGrid};
use batchlens::selection::{score_samples, select_topk, SelectorConfig, DEFAULT_DELTA, DEFAULT_RATIO};
use batchlens::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchlensStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    ValueOutOfRange = 4,
    EmptyInput = 5,
    Internal = 6,
}

/// Selector settings passed by value to [`batchlens_handle_new`].
/// `min_pts = 0` means `max(3, ceil(0.01 N))`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchlensConfig {
    pub b: usize,
    pub big_batch_ratio: f64,
    pub delta: f64,
    pub beta: f64,
    pub weight_si: f64,
    pub weight_eg: f64,
    pub weight_tv: f64,
    pub seed: u64,
    pub eps: f64,
    pub min_pts: usize,
}

/// Opaque session: a selector configuration plus pivot state.
pub struct BatchlensHandle {
    config: SelectorConfig,
    pivot: Option<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BatchlensStatus {
    match e {
        Error::ShapeMismatch { .. } | Error::InvalidDimensions { .. } | Error::UnsupportedChannels(_) => {
            BatchlensStatus::ShapeMismatch
        }
        Error::ValueOutOfRange { .. } | Error::NonFiniteScore { .. } => BatchlensStatus::ValueOutOfRange,
        Error::EmptyMissingRegion | Error::NoGlcmPairs => BatchlensStatus::EmptyInput,
        Error::Diverged { .. } | Error::LossCallback(_) | Error::Io { .. } => BatchlensStatus::Internal,
        _ => BatchlensStatus::InvalidArgument,
    }
}

fn fail(status: BatchlensStatus, msg: &str) -> BatchlensStatus {
    set_last_error(msg);
    status
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (BatchlensStatus, String)>) -> BatchlensStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BatchlensStatus::Ok
        }
        Ok(Err((status, msg))) => fail(status, &msg),
        Err(_) => fail(BatchlensStatus::Internal, "internal panic"),
    }
}

fn core_err(e: Error) -> (BatchlensStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BatchlensStatus, String) {
    (BatchlensStatus::NullPointer, format!("`{what}` is null"))
}

fn empty(what: &str) -> (BatchlensStatus, String) {
    (BatchlensStatus::EmptyInput, format!("`{what}` is empty"))
}

/// Borrows `len` elements, rejecting null pointers.
///
/// # Safety
/// `p` must point to `len` readable elements when non-null.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (BatchlensStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must point to `len` writable elements when non-null.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (BatchlensStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn selector_from(c: &BatchlensConfig) -> Result<SelectorConfig, Error> {
    let config = SelectorConfig {
        b: c.b,
        big_batch_ratio: c.big_batch_ratio,
        delta: c.delta,
        beta: c.beta,
        weights: Weights::new(c.weight_si, c.weight_eg, c.weight_tv)?,
        seed: c.seed,
        calibration: CalibrationParams {
            eps: c.eps,
            min_pts: (c.min_pts > 0).then_some(c.min_pts),
        },
        ..SelectorConfig::default()
    };
    config.validate()?;
    Ok(config)
}

/// Library defaults: b = 16, B = 2b, delta = 0.01, TV-only weights,
/// eps = 0.05, automatic min_pts.
#[no_mangle]
pub extern "C" fn batchlens_config_default() -> BatchlensConfig {
    let d = SelectorConfig::default();
    BatchlensConfig {
        b: d.b,
        big_batch_ratio: DEFAULT_RATIO,
        delta: DEFAULT_DELTA,
        beta: d.beta,
        weight_si: d.weights.si,
        weight_eg: d.weights.eg,
        weight_tv: d.weights.tv,
        seed: d.seed,
        eps: d.calibration.eps,
        min_pts: 0,
    }
}

/// NUL-terminated message of the last failed call on this thread; empty
/// after a successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn batchlens_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a session. The handle must be released with
/// [`batchlens_handle_free`].
///
/// # Safety
/// `config` must be null or point to a valid `BatchlensConfig`; `out` must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn batchlens_handle_new(
    config: *const BatchlensConfig,
    out: *mut *mut BatchlensHandle,
) -> BatchlensStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let config = selector_from(&*config).map_err(core_err)?;
        *out = Box::into_raw(Box::new(BatchlensHandle { config, pivot: None }));
        Ok(())
    })
}

/// Releases a session; null is ignored.
///
/// # Safety
/// `handle` must come from [`batchlens_handle_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn batchlens_handle_free(handle: *mut BatchlensHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Fixes the pivot used by [`batchlens_score`]. A NaN clears it, so the
/// next score call calibrates on its batch.
///
/// # Safety
/// `handle` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn batchlens_set_pivot(handle: *mut BatchlensHandle, pivot: f64) -> BatchlensStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        if pivot.is_nan() {
            h.pivot = None;
        } else if pivot.is_finite() {
            h.pivot = Some(pivot);
        } else {
            return Err((BatchlensStatus::ValueOutOfRange, format!("pivot {pivot} is not finite")));
        }
        Ok(())
    })
}

/// Current pivot, or NaN when none has been set or calibrated.
///
/// # Safety
/// `handle` must be a live handle or null; `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn batchlens_get_pivot(handle: *const BatchlensHandle, out: *mut f64) -> BatchlensStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.pivot.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Proposed scores of a batch.
///
/// `images` holds `n` images of `height x width x channels` values in
/// `[0, 1]`, row-major with channels innermost. `masks` holds `n` masks of
/// `height x width` bytes, 1 = observed and 0 = missing. Complexities are
/// min-max normalized over the batch. When the handle has no pivot it is
/// calibrated on the batch and kept. `out_complexities` may be null.
///
/// # Safety
/// All non-null pointers must cover the sizes implied by `n`, `height`,
/// `width` and `channels`.
#[no_mangle]
pub unsafe extern "C" fn batchlens_score(
    handle: *mut BatchlensHandle,
    images: *const f64,
    masks: *const u8,
    losses: *const f64,
    n: usize,
    height: usize,
    width: usize,
    channels: usize,
    out_scores: *mut f64,
    out_complexities: *mut f64,
) -> BatchlensStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        if n == 0 {
            return Err(empty("batch"));
        }
        if height == 0 || width == 0 || channels == 0 {
            return Err((BatchlensStatus::ShapeMismatch, format!("bad image shape {height}x{width}x{channels}")));
        }
        let pixels = height
            .checked_mul(width)
            .ok_or_else(|| (BatchlensStatus::ShapeMismatch, "image size overflows".to_string()))?;
        let values = pixels
            .checked_mul(channels)
            .ok_or_else(|| (BatchlensStatus::ShapeMismatch, "image size overflows".to_string()))?;
        let total = values
            .checked_mul(n)
            .ok_or_else(|| (BatchlensStatus::ShapeMismatch, "batch size overflows".to_string()))?;
        let images = slice(images, total, "images")?;
        let masks = slice(masks, pixels * n, "masks")?;
        let losses = slice(losses, n, "losses")?;
        let out_scores = slice_mut(out_scores, n, "out_scores")?;

        let tensors = images
            .chunks_exact(values)
            .map(|d| ImageTensor::new(height, width, channels, d.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        let grids = masks
            .chunks_exact(pixels)
            .map(|m| MaskGrid::new(height, width, m.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        let samples: Vec<(&ImageTensor, &MaskGrid)> = tensors.iter().zip(&grids).collect();
        let c = &h.config;
        let batch =
            score_samples(&samples, losses, &c.weights, h.pivot, c.delta, c.calibration).map_err(core_err)?;
        h.pivot = Some(batch.pivot);
        out_scores.copy_from_slice(&batch.scores);
        if !out_complexities.is_null() {
            slice_mut(out_complexities, n, "out_complexities")?.copy_from_slice(&batch.complexities);
        }
        Ok(())
    })
}

/// Indices of the `b` largest scores, largest first, ties to the lower
/// index. `out_indices` receives `b` values.
///
/// # Safety
/// `scores` must cover `n` values and `out_indices` `b` slots.
#[no_mangle]
pub unsafe extern "C" fn batchlens_select(
    scores: *const f64,
    n: usize,
    b: usize,
    out_indices: *mut usize,
) -> BatchlensStatus {
    guard(|| {
        if n == 0 {
            return Err(empty("scores"));
        }
        let scores = slice(scores, n, "scores")?;
        let out = slice_mut(out_indices, b, "out_indices")?;
        let chosen = select_topk(scores, b).map_err(core_err)?;
        out.copy_from_slice(&chosen);
        Ok(())
    })
}

/// Calibrates the pivot from normalized complexities with the handle's
/// DBSCAN settings, stores it in the handle and writes it to `out_pivot`.
///
/// # Safety
/// `values` must cover `n` values; `out_pivot` writable or null.
#[no_mangle]
pub unsafe extern "C" fn batchlens_calibrate(
    handle: *mut BatchlensHandle,
    values: *const f64,
    n: usize,
    out_pivot: *mut f64,
) -> BatchlensStatus {
    guard(|| {
        let h = handle.as_mut().ok_or_else(|| null("handle"))?;
        if n == 0 {
            return Err(empty("values"));
        }
        let values = slice(values, n, "values")?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err((BatchlensStatus::ValueOutOfRange, format!("complexity {v} is not finite")));
        }
        let params = h.config.calibration.resolve(n);
        let result = estimate_pivot_with(values, params).map_err(core_err)?;
        h.pivot = Some(result.pivot);
        if !out_pivot.is_null() {
            *out_pivot = result.pivot;
        }
        Ok(())
    })
}

/// Big-batch size `ceil(ratio * b)` of the handle's configuration.
///
/// # Safety
/// `handle` must be a live handle or null; `out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn batchlens_big_batch(handle: *const BatchlensHandle, out: *mut usize) -> BatchlensStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.config.big_batch();
        Ok(())
    })
}
