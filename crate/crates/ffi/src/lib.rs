//! C ABI over the device policy and the weld simulator.
//!
//! Every fallible call returns a [`WlStatus`]; on anything other than
//! `WL_STATUS_OK` a message is available from [`wl_last_error`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Passing a null handle to `_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use weldloop::qnet::{infer, quantize_obs, tanh_poly, QuantizedPolicy};
use weldloop::weldsim::{Preset, SensorReading, SimParams, SurfaceProfile, WeldEnv};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BadBlob = 3,
    Simulation = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WlPreset {
    Brushed = 0,
    Sandblasted = 1,
    Mixed = 2,
}

/// Quantized policy as loaded on the device.
pub struct WlPolicy(QuantizedPolicy);

/// One simulated weld line.
pub struct WlWeldEnv(WeldEnv);

/// A sensor reading in volts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WlReading {
    pub or_volts: f64,
    pub oe_volts: f64,
}

impl From<SensorReading> for WlReading {
    fn from(r: SensorReading) -> Self {
        Self {
            or_volts: r.or_volts,
            oe_volts: r.oe_volts,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let text = CString::new(msg.to_string().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: WlStatus, msg: impl ToString) -> WlStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> WlStatus) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(WlStatus::Panic, "panic inside weldloop"),
    }
}

/// Message for the last failed call on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Piecewise-polynomial tanh used by the device.
#[no_mangle]
pub extern "C" fn wl_tanh_poly(x: f64) -> f64 {
    tanh_poly(x)
}

/// Parse a serialized policy blob.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_policy_from_blob(data: *const u8, len: usize, out: *mut *mut WlPolicy) -> WlStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(WlStatus::NullPointer, "null argument");
        }
        let bytes = std::slice::from_raw_parts(data, len);
        match QuantizedPolicy::from_blob(bytes) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(WlPolicy(p)));
                WlStatus::Ok
            }
            Err(e) => fail(WlStatus::BadBlob, e),
        }
    })
}

/// Version stamped into the blob, 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_policy_version(policy: *const WlPolicy) -> u32 {
    policy.as_ref().map_or(0, |p| p.0.version())
}

/// One device inference: observation in volts, standard-normal epsilon
/// (0 for the deterministic action), commanded power in watts.
///
/// # Safety
/// `policy` must be a live handle and `power_watts` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_policy_infer(
    policy: *const WlPolicy,
    or_volts: f64,
    oe_volts: f64,
    epsilon: f64,
    power_watts: *mut f64,
) -> WlStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), power_watts.is_null()) else {
            return fail(WlStatus::NullPointer, "null argument");
        };
        if !(or_volts.is_finite() && oe_volts.is_finite() && epsilon.is_finite()) {
            return fail(WlStatus::InvalidArgument, "non-finite input");
        }
        *power_watts = infer(&p.0, quantize_obs([or_volts, oe_volts]), epsilon).power_watts;
        WlStatus::Ok
    })
}

/// # Safety
/// `policy` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wl_policy_free(policy: *mut WlPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// New weld line on a preset surface with default process parameters.
/// `noise == false` gives the deterministic process.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wl_weld_env_new(
    preset: WlPreset,
    seed: u64,
    episode: u64,
    noise: bool,
    out: *mut *mut WlWeldEnv,
) -> WlStatus {
    guard(|| {
        if out.is_null() {
            return fail(WlStatus::NullPointer, "null argument");
        }
        let params = if noise { SimParams::default() } else { SimParams::noiseless() };
        let preset = match preset {
            WlPreset::Brushed => Preset::Brushed,
            WlPreset::Sandblasted => Preset::Sandblasted,
            WlPreset::Mixed => Preset::Mixed,
        };
        let profile = SurfaceProfile::preset(preset, params.noise_brushed, params.noise_sandblasted);
        *out = Box::into_raw(Box::new(WlWeldEnv(WeldEnv::new(profile, params, seed, episode))));
        WlStatus::Ok
    })
}

unsafe fn with_env(
    env: *mut WlWeldEnv,
    reading: *mut WlReading,
    f: impl FnOnce(&mut WeldEnv) -> Result<SensorReading, weldloop::weldsim::SimError>,
) -> WlStatus {
    guard(|| {
        let (Some(e), false) = (env.as_mut(), reading.is_null()) else {
            return fail(WlStatus::NullPointer, "null argument");
        };
        match f(&mut e.0) {
            Ok(r) => {
                *reading = r.into();
                WlStatus::Ok
            }
            Err(err) => fail(WlStatus::Simulation, err),
        }
    })
}

/// Read the sensors under `power_watts` without advancing the line.
///
/// # Safety
/// `env` must be a live handle and `reading` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_weld_env_probe(env: *mut WlWeldEnv, power_watts: f64, reading: *mut WlReading) -> WlStatus {
    with_env(env, reading, |e| e.probe(power_watts))
}

/// Apply `power_watts` for one step and read the sensors.
///
/// # Safety
/// `env` must be a live handle and `reading` writable.
#[no_mangle]
pub unsafe extern "C" fn wl_weld_env_step(env: *mut WlWeldEnv, power_watts: f64, reading: *mut WlReading) -> WlStatus {
    with_env(env, reading, |e| e.step(power_watts))
}

/// True once the line has run its full number of steps.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wl_weld_env_done(env: *const WlWeldEnv) -> bool {
    env.as_ref().is_none_or(|e| e.0.done())
}

/// # Safety
/// `env` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wl_weld_env_free(env: *mut WlWeldEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}
