//! C ABI over the simulator: opaque config handles, status codes, and a
//! thread-local error message.
//!
//! Every function is panic-safe at the boundary; failures come back as a
//! [`SimHmimoStatus`] and the message behind [`sim_hmimo_last_error`].

use simhmimo::experiments::runner::optimize_single_link;
use simhmimo::experiments::{parse_config_str, run_scenario, Scenario, ScenarioConfig};
use simhmimo::optimizer::StepMode;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result of every call across the boundary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimHmimoStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration was rejected; see the last error message.
    InvalidConfig = 3,
    /// The run itself failed; see the last error message.
    RunFailed = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Opaque scenario-configuration handle. Create with one of the
/// constructors, release with [`sim_hmimo_config_free`].
#[repr(C)]
pub struct SimHmimoConfig {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: impl AsRef<str>) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_ref().as_bytes());
    });
}

fn into_handle(cfg: ScenarioConfig) -> *mut SimHmimoConfig {
    Box::into_raw(Box::new(cfg)).cast()
}

unsafe fn borrow_handle<'a>(ptr: *const SimHmimoConfig) -> Option<&'a ScenarioConfig> {
    ptr.cast::<ScenarioConfig>().as_ref()
}

unsafe fn borrow_handle_mut<'a>(ptr: *mut SimHmimoConfig) -> Option<&'a mut ScenarioConfig> {
    ptr.cast::<ScenarioConfig>().as_mut()
}

fn guarded(f: impl FnOnce() -> SimHmimoStatus) -> SimHmimoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            set_error(msg);
            SimHmimoStatus::Panic
        }
    }
}

unsafe fn read_utf8<'a>(ptr: *const c_char) -> Result<&'a str, SimHmimoStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(SimHmimoStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        SimHmimoStatus::InvalidUtf8
    })
}

/// Copy the most recent error message of this thread into `buf` (truncated
/// to `len - 1` bytes, always NUL-terminated when `len > 0`). Returns the
/// full message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// New configuration with the small desk-scale preset.
#[no_mangle]
pub extern "C" fn sim_hmimo_config_desk() -> *mut SimHmimoConfig {
    into_handle(ScenarioConfig::desk_default())
}

/// New configuration with the published full-scale system.
#[no_mangle]
pub extern "C" fn sim_hmimo_config_paper() -> *mut SimHmimoConfig {
    into_handle(ScenarioConfig::paper_default())
}

/// Parse a TOML configuration document. `strict` rejects unknown keys;
/// `desk` selects the desk-scale preset as the base for missing keys. On
/// success `*out` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_config_from_toml(
    text: *const c_char,
    strict: bool,
    desk: bool,
    out: *mut *mut SimHmimoConfig,
) -> SimHmimoStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SimHmimoStatus::NullArgument;
        }
        let text = match read_utf8(text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_config_str(text, strict, desk) {
            Ok((cfg, _warnings)) => {
                *out = into_handle(cfg);
                SimHmimoStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                SimHmimoStatus::InvalidConfig
            }
        }
    })
}

/// Release a configuration handle. Null is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_config_free(cfg: *mut SimHmimoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg.cast::<ScenarioConfig>()));
    }
}

/// Set the base seed; realization r uses seed + r.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_config_set_seed(
    cfg: *mut SimHmimoConfig,
    seed: u64,
) -> SimHmimoStatus {
    guarded(|| match borrow_handle_mut(cfg) {
        Some(c) => {
            c.seed_base = seed;
            SimHmimoStatus::Ok
        }
        None => {
            set_error("null config handle");
            SimHmimoStatus::NullArgument
        }
    })
}

/// Set the number of channel realizations per parameter point.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_config_set_realizations(
    cfg: *mut SimHmimoConfig,
    realizations: u32,
) -> SimHmimoStatus {
    guarded(|| match borrow_handle_mut(cfg) {
        Some(c) if realizations > 0 => {
            c.realizations = realizations as usize;
            SimHmimoStatus::Ok
        }
        Some(_) => {
            set_error("realizations must be at least 1");
            SimHmimoStatus::InvalidConfig
        }
        None => {
            set_error("null config handle");
            SimHmimoStatus::NullArgument
        }
    })
}

/// Select the scenario by name: one of `convergence`, `init-sensitivity`,
/// `layer-sweep`, `atom-sweep`, `antenna-sweep`, `baselines`, `complexity`.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_config_set_scenario(
    cfg: *mut SimHmimoConfig,
    name: *const c_char,
) -> SimHmimoStatus {
    guarded(|| {
        let name = match read_utf8(name) {
            Ok(n) => n,
            Err(status) => return status,
        };
        match borrow_handle_mut(cfg) {
            Some(c) => match Scenario::parse(name) {
                Some(s) => {
                    c.scenario = s;
                    SimHmimoStatus::Ok
                }
                None => {
                    set_error(format!("`{name}` is not a known scenario"));
                    SimHmimoStatus::InvalidConfig
                }
            },
            None => {
                set_error("null config handle");
                SimHmimoStatus::NullArgument
            }
        }
    })
}

/// Choose the step rule: 0 selects backtracking, 1 the fixed
/// Lipschitz-derived step.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_config_set_fixed_step(
    cfg: *mut SimHmimoConfig,
    fixed: bool,
) -> SimHmimoStatus {
    guarded(|| match borrow_handle_mut(cfg) {
        Some(c) => {
            c.optimizer.mode = if fixed {
                StepMode::FixedStep
            } else {
                StepMode::Backtracking
            };
            SimHmimoStatus::Ok
        }
        None => {
            set_error("null config handle");
            SimHmimoStatus::NullArgument
        }
    })
}

/// Run the configured scenario, writing the CSV and JSON summary under
/// `out_dir` (created if missing).
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_run_scenario(
    cfg: *const SimHmimoConfig,
    out_dir: *const c_char,
) -> SimHmimoStatus {
    guarded(|| {
        let dir = match read_utf8(out_dir) {
            Ok(d) => d,
            Err(status) => return status,
        };
        let cfg = match borrow_handle(cfg) {
            Some(c) => c,
            None => {
                set_error("null config handle");
                return SimHmimoStatus::NullArgument;
            }
        };
        match run_scenario(cfg, Path::new(dir)) {
            Ok(_) => SimHmimoStatus::Ok,
            Err(e) => {
                set_error(e.to_string());
                SimHmimoStatus::RunFailed
            }
        }
    })
}

/// Optimize one link drawn with `seed` under the handle's geometry, link,
/// and optimizer settings. Writes the achieved rate (bits/s/Hz) and the
/// number of accepted iterations through the out-pointers.
#[no_mangle]
pub unsafe extern "C" fn sim_hmimo_optimize_link(
    cfg: *const SimHmimoConfig,
    seed: u64,
    out_rate_bits: *mut f64,
    out_iterations: *mut u32,
) -> SimHmimoStatus {
    guarded(|| {
        if out_rate_bits.is_null() || out_iterations.is_null() {
            set_error("null output pointer");
            return SimHmimoStatus::NullArgument;
        }
        let cfg = match borrow_handle(cfg) {
            Some(c) => c,
            None => {
                set_error("null config handle");
                return SimHmimoStatus::NullArgument;
            }
        };
        match optimize_single_link(cfg, seed) {
            Ok((rate, iters)) => {
                *out_rate_bits = rate;
                *out_iterations = iters as u32;
                SimHmimoStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                SimHmimoStatus::RunFailed
            }
        }
    })
}
