//! Exercises the C surface exactly as a foreign caller would: raw
//! pointers, status codes, and the thread-local error message.

use simhmimo_ffi::*;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;

fn last_error() -> String {
    let mut buf = vec![0i8; 256];
    unsafe {
        sim_hmimo_last_error(buf.as_mut_ptr() as *mut c_char, buf.len());
        CStr::from_ptr(buf.as_ptr() as *const c_char)
            .to_string_lossy()
            .into_owned()
    }
}

#[test]
fn desk_handle_runs_a_scenario_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().join("ffi_out").to_str().unwrap()).unwrap();
    unsafe {
        let cfg = sim_hmimo_config_desk();
        assert!(!cfg.is_null());
        assert_eq!(sim_hmimo_config_set_seed(cfg, 11), SimHmimoStatus::Ok);
        assert_eq!(sim_hmimo_config_set_realizations(cfg, 1), SimHmimoStatus::Ok);
        let name = CString::new("baselines").unwrap();
        assert_eq!(
            sim_hmimo_config_set_scenario(cfg, name.as_ptr()),
            SimHmimoStatus::Ok
        );
        assert_eq!(
            sim_hmimo_run_scenario(cfg, out.as_ptr()),
            SimHmimoStatus::Ok
        );
        sim_hmimo_config_free(cfg);
    }
    let csv = dir.path().join("ffi_out/baselines.csv");
    let body = std::fs::read_to_string(csv).unwrap();
    assert!(body.starts_with("realization,seed,"));
    assert_eq!(body.lines().count(), 2);
}

#[test]
fn toml_parsing_reports_errors_with_key_paths() {
    unsafe {
        let mut out = std::ptr::null_mut();
        let bad = CString::new("[link]\nbogus = 1\n").unwrap();
        let status = sim_hmimo_config_from_toml(bad.as_ptr(), true, true, &mut out);
        assert_eq!(status, SimHmimoStatus::InvalidConfig);
        assert!(last_error().contains("link.bogus"));

        let good = CString::new("[link]\ntx_power = \"20 dBm\"\n").unwrap();
        let status = sim_hmimo_config_from_toml(good.as_ptr(), true, true, &mut out);
        assert_eq!(status, SimHmimoStatus::Ok);
        assert!(!out.is_null());
        sim_hmimo_config_free(out);
    }
}

#[test]
fn optimize_link_returns_finite_rate() {
    unsafe {
        let cfg = sim_hmimo_config_desk();
        // Shrink the system so the test stays fast.
        let toml = CString::new(
            "[geometry.tx]\nside_count = 3\nantenna_count = 2\n[geometry.rx]\nside_count = 3\nantenna_count = 2\n[optimizer]\nmax_iters = 30\n",
        )
        .unwrap();
        let mut small = std::ptr::null_mut();
        assert_eq!(
            sim_hmimo_config_from_toml(toml.as_ptr(), true, true, &mut small),
            SimHmimoStatus::Ok
        );
        let mut rate = f64::NAN;
        let mut iters = 0u32;
        let status = sim_hmimo_optimize_link(small, 5, &mut rate, &mut iters);
        assert_eq!(status, SimHmimoStatus::Ok);
        assert!(rate.is_finite() && rate > 0.0);
        assert!(iters > 0);

        // Determinism through the C surface.
        let mut rate2 = f64::NAN;
        let mut iters2 = 0u32;
        sim_hmimo_optimize_link(small, 5, &mut rate2, &mut iters2);
        assert_eq!(rate.to_bits(), rate2.to_bits());
        assert_eq!(iters, iters2);

        sim_hmimo_config_free(small);
        sim_hmimo_config_free(cfg);
    }
}

#[test]
fn null_arguments_are_rejected_not_crashed() {
    unsafe {
        assert_eq!(
            sim_hmimo_config_set_seed(std::ptr::null_mut(), 1),
            SimHmimoStatus::NullArgument
        );
        let mut rate = 0.0;
        let mut iters = 0u32;
        assert_eq!(
            sim_hmimo_optimize_link(std::ptr::null(), 1, &mut rate, &mut iters),
            SimHmimoStatus::NullArgument
        );
        let cfg = sim_hmimo_config_desk();
        assert_eq!(
            sim_hmimo_optimize_link(cfg, 1, std::ptr::null_mut(), &mut iters),
            SimHmimoStatus::NullArgument
        );
        assert_eq!(
            sim_hmimo_run_scenario(cfg, std::ptr::null()),
            SimHmimoStatus::NullArgument
        );
        sim_hmimo_config_free(cfg);
        // Freeing null must be a no-op.
        sim_hmimo_config_free(std::ptr::null_mut());
    }
}

#[test]
fn unknown_scenario_name_is_invalid_config() {
    unsafe {
        let cfg = sim_hmimo_config_desk();
        let name = CString::new("frequency-sweep").unwrap();
        assert_eq!(
            sim_hmimo_config_set_scenario(cfg, name.as_ptr()),
            SimHmimoStatus::InvalidConfig
        );
        assert!(last_error().contains("frequency-sweep"));
        sim_hmimo_config_free(cfg);
    }
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/simhmimo.h"
    ))
    .expect("header generated at build time");
    for symbol in [
        "sim_hmimo_config_desk",
        "sim_hmimo_config_paper",
        "sim_hmimo_config_from_toml",
        "sim_hmimo_config_free",
        "sim_hmimo_run_scenario",
        "sim_hmimo_optimize_link",
        "sim_hmimo_last_error",
        "SimHmimoStatus",
        "SIMHMIMO_H",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
