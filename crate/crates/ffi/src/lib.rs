//! C ABI over the `fndam` simulator.
//!
//! Cells and arrays are opaque heap handles created by `*_new` and released by `*_free`.
//! Every fallible call returns an [`FndamStatus`]; on failure the message is available from
//! [`fndam_last_error_message`] on the same thread until the next failing call. Results are
//! returned through out-pointers, which are left untouched on failure. Handles are not
//! thread-safe; share one across threads only with external locking.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fndam::array::{build_array, DamArray, MismatchSpec, PulseTarget};
use fndam::calibration;
use fndam::cell::{synchronize, DamCell, Side};
use fndam::energy;
use fndam::node::{FnParams, Pulse};
use fndam::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FndamStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Argument = 3,
    Initialization = 4,
    StepSize = 5,
    Saturation = 6,
    Parse = 7,
    Config = 8,
    NotSeparable = 9,
    Io = 10,
    Utf8 = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FndamSide {
    Set = 0,
    Reset = 1,
}

impl From<FndamSide> for Side {
    fn from(s: FndamSide) -> Self {
        match s {
            FndamSide::Set => Side::Set,
            FndamSide::Reset => Side::Reset,
        }
    }
}

/// Device constants: `k1` (1/s), `k2` (V), capacitances (F).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FndamParams {
    pub k1: f64,
    pub k2: f64,
    pub c_total: f64,
    pub c_couple: f64,
}

impl From<FndamParams> for FnParams {
    fn from(p: FndamParams) -> Self {
        FnParams {
            k1: p.k1,
            k2: p.k2,
            c_total: p.c_total,
            c_couple: p.c_couple,
            quantize_charge: false,
        }
    }
}

/// Opaque DAM cell.
pub struct FndamCell {
    inner: DamCell,
}

/// Opaque DAM array.
pub struct FndamArray {
    inner: DamArray,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FndamStatus {
    match e {
        Error::Domain(_) => FndamStatus::Domain,
        Error::Argument(_) => FndamStatus::Argument,
        Error::Initialization(_) => FndamStatus::Initialization,
        Error::StepSize { .. } => FndamStatus::StepSize,
        Error::Saturation { .. } => FndamStatus::Saturation,
        Error::Parse { .. } => FndamStatus::Parse,
        Error::Config { .. } => FndamStatus::Config,
        Error::NotSeparable(_) => FndamStatus::NotSeparable,
        Error::Io(_) => FndamStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Utf8,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard<F>(f: F) -> FndamStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FndamStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            FndamStatus::NullPointer
        }
        Ok(Err(Failure::Utf8)) => {
            set_last_error("string argument is not valid UTF-8".into());
            FndamStatus::Utf8
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FndamStatus::Panic
        }
    }
}

unsafe fn from_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn from_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

/// Message of the last failing call on this thread, or NULL. Valid until the next failing
/// call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn fndam_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Shipped device calibration.
#[no_mangle]
pub extern "C" fn fndam_default_params() -> FndamParams {
    let p = calibration::calibrated_params();
    FndamParams {
        k1: p.k1,
        k2: p.k2,
        c_total: p.c_total,
        c_couple: p.c_couple,
    }
}

/// Initial node voltage of the shipped calibration (V).
#[no_mangle]
pub extern "C" fn fndam_default_v0() -> f64 {
    calibration::V0
}

/// `0.5 * c_in * v_in^2` (J).
#[no_mangle]
pub extern "C" fn fndam_write_energy(c_in: f64, v_in: f64) -> f64 {
    energy::write_energy(c_in, v_in)
}

// ---------------------------------------------------------------- cells

/// Synchronised cell with identical SET and RESET nodes starting at `v0`.
///
/// # Safety
/// `params` must point to a valid `FndamParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_new(params: *const FndamParams, v0: f64, out: *mut *mut FndamCell) -> FndamStatus {
    guard(|| {
        let p: FnParams = (*from_ref(params, "params")?).into();
        let out = from_mut(out, "out")?;
        p.validate()?;
        let inner = synchronize(&p, &p, v0)?;
        *out = Box::into_raw(Box::new(FndamCell { inner }));
        Ok(())
    })
}

/// Releases a cell; NULL is ignored.
///
/// # Safety
/// `cell` must come from `fndam_cell_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_free(cell: *mut FndamCell) {
    if !cell.is_null() {
        drop(Box::from_raw(cell));
    }
}

/// Current weight (mV).
///
/// # Safety
/// `cell` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_weight(cell: *const FndamCell, out: *mut f64) -> FndamStatus {
    guard(|| {
        let c = from_ref(cell, "cell")?;
        *from_mut(out, "out")? = c.inner.weight();
        Ok(())
    })
}

/// Time since synchronisation (s).
///
/// # Safety
/// `cell` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_clock(cell: *const FndamCell, out: *mut f64) -> FndamStatus {
    guard(|| {
        let c = from_ref(cell, "cell")?;
        *from_mut(out, "out")? = c.inner.clock;
        Ok(())
    })
}

/// Applies `n_pulses` pulses at `frequency` to one side; the other node keeps decaying.
///
/// # Safety
/// `cell` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_pulse(
    cell: *mut FndamCell,
    side: FndamSide,
    amplitude: f64,
    duration: f64,
    n_pulses: u64,
    frequency: f64,
) -> FndamStatus {
    guard(|| {
        let c = from_mut(cell, "cell")?;
        let pulse = Pulse::new(amplitude, duration)?;
        c.inner = if n_pulses == 1 {
            c.inner.pulse(side.into(), pulse)?
        } else {
            c.inner.pulse_train(side.into(), pulse, n_pulses, frequency)?
        };
        Ok(())
    })
}

/// Lets both nodes tunnel freely for `dt` seconds.
///
/// # Safety
/// `cell` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_decay(cell: *mut FndamCell, dt: f64) -> FndamStatus {
    guard(|| {
        let c = from_mut(cell, "cell")?;
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("decay time must be finite and >= 0, got {dt}")).into());
        }
        c.inner = c.inner.decay(dt);
        Ok(())
    })
}

/// Amplitude that writes `target_mv` on `side` with one pulse of `duration` (V).
///
/// # Safety
/// `cell` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_cell_precompensated_amplitude(
    cell: *const FndamCell,
    side: FndamSide,
    target_mv: f64,
    duration: f64,
    amp_max: f64,
    out: *mut f64,
) -> FndamStatus {
    guard(|| {
        let c = from_ref(cell, "cell")?;
        let out = from_mut(out, "out")?;
        *out = c.inner.precompensated_amplitude(side.into(), target_mv, duration, amp_max)?;
        Ok(())
    })
}

// ---------------------------------------------------------------- arrays

/// `n` cells around `params` with Gaussian relative mismatch `sigma` drawn from `seed`.
///
/// # Safety
/// `params` must point to a valid `FndamParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_new(
    n: usize,
    params: *const FndamParams,
    v0: f64,
    sigma: f64,
    seed: u64,
    out: *mut *mut FndamArray,
) -> FndamStatus {
    guard(|| {
        let p: FnParams = (*from_ref(params, "params")?).into();
        let out = from_mut(out, "out")?;
        let spec = MismatchSpec {
            relative_sigma: sigma,
            seed,
            ..Default::default()
        };
        let inner = build_array(n, &p, v0, spec)?;
        *out = Box::into_raw(Box::new(FndamArray { inner }));
        Ok(())
    })
}

/// Releases an array; NULL is ignored.
///
/// # Safety
/// `array` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_free(array: *mut FndamArray) {
    if !array.is_null() {
        drop(Box::from_raw(array));
    }
}

/// Number of cells.
///
/// # Safety
/// `array` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_len(array: *const FndamArray, out: *mut usize) -> FndamStatus {
    guard(|| {
        let a = from_ref(array, "array")?;
        *from_mut(out, "out")? = a.inner.len();
        Ok(())
    })
}

/// Copies the weights (mV) into `buf`, which must hold `len` doubles with `len` equal to
/// the array length.
///
/// # Safety
/// `array` must be a live handle; `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_weights(array: *const FndamArray, buf: *mut f64, len: usize) -> FndamStatus {
    guard(|| {
        let a = from_ref(array, "array")?;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        if len != a.inner.len() {
            return Err(Error::Argument(format!("buffer holds {len} weights, array has {}", a.inner.len())).into());
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        dst.copy_from_slice(&a.inner.weights());
        Ok(())
    })
}

/// Pulses one cell for a window of `window` seconds; every other cell decays for the window.
///
/// # Safety
/// `array` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_pulse(
    array: *mut FndamArray,
    index: usize,
    side: FndamSide,
    amplitude: f64,
    duration: f64,
    n_pulses: u64,
    frequency: f64,
    window: f64,
) -> FndamStatus {
    guard(|| {
        let a = from_mut(array, "array")?;
        let target = PulseTarget {
            index,
            side: side.into(),
            pulse: Pulse::new(amplitude, duration)?,
            n_pulses,
            frequency,
        };
        a.inner = a.inner.batch_pulse(&[target], window)?;
        Ok(())
    })
}

/// Lets every cell decay for `dt` seconds.
///
/// # Safety
/// `array` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_advance(array: *mut FndamArray, dt: f64) -> FndamStatus {
    guard(|| {
        let a = from_mut(array, "array")?;
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("advance time must be finite and >= 0, got {dt}")).into());
        }
        a.inner = a.inner.advance(dt);
        Ok(())
    })
}

/// Serialises the array to its JSON state document. Release with `fndam_string_free`.
///
/// # Safety
/// `array` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_save_state(array: *const FndamArray, out: *mut *mut c_char) -> FndamStatus {
    guard(|| {
        let a = from_ref(array, "array")?;
        let out = from_mut(out, "out")?;
        let text = a.inner.save_state()?;
        let c = CString::new(text).map_err(|e| Error::Io(e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// Restores an array from a JSON state document.
///
/// # Safety
/// `document` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fndam_array_load_state(document: *const c_char, out: *mut *mut FndamArray) -> FndamStatus {
    guard(|| {
        if document.is_null() {
            return Err(Failure::Null("document"));
        }
        let out = from_mut(out, "out")?;
        let text = CStr::from_ptr(document).to_str().map_err(|_| Failure::Utf8)?;
        let inner = DamArray::load_state(text)?;
        *out = Box::into_raw(Box::new(FndamArray { inner }));
        Ok(())
    })
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fndam_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_out_pointer_reports_status() {
        let p = fndam_default_params();
        let status = unsafe { fndam_cell_new(&p, 7.5, ptr::null_mut()) };
        assert_eq!(status, FndamStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(fndam_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("out"));
    }

    #[test]
    fn invalid_voltage_maps_to_domain() {
        let p = fndam_default_params();
        let mut cell = ptr::null_mut();
        let status = unsafe { fndam_cell_new(&p, -1.0, &mut cell) };
        assert_ne!(status, FndamStatus::Ok);
        assert!(cell.is_null());
    }
}
