use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fndam_ffi::*;

#[test]
fn cell_pulse_and_decay_through_the_abi() {
    let p = fndam_default_params();
    let mut cell = ptr::null_mut();
    unsafe {
        assert_eq!(fndam_cell_new(&p, fndam_default_v0(), &mut cell), FndamStatus::Ok);
        let mut amp = 0.0;
        assert_eq!(
            fndam_cell_precompensated_amplitude(cell, FndamSide::Set, 1.0, 0.5, 32.0, &mut amp),
            FndamStatus::Ok
        );
        assert_eq!(fndam_cell_pulse(cell, FndamSide::Set, amp, 0.5, 1, 1.0), FndamStatus::Ok);
        let mut w = 0.0;
        assert_eq!(fndam_cell_weight(cell, &mut w), FndamStatus::Ok);
        assert!((w - 1.0).abs() < 1e-6, "{w}");
        assert_eq!(fndam_cell_decay(cell, 40.0), FndamStatus::Ok);
        let mut later = 0.0;
        fndam_cell_weight(cell, &mut later);
        assert!(later > 0.0 && later < w);
        let mut clock = 0.0;
        fndam_cell_clock(cell, &mut clock);
        assert!((clock - 40.5).abs() < 1e-12);
        assert_eq!(fndam_cell_decay(cell, f64::NAN), FndamStatus::Argument);
        fndam_cell_free(cell);
    }
}

#[test]
fn bad_pulse_sets_last_error() {
    let p = fndam_default_params();
    let mut cell = ptr::null_mut();
    unsafe {
        assert_eq!(fndam_cell_new(&p, 7.5, &mut cell), FndamStatus::Ok);
        let status = fndam_cell_pulse(cell, FndamSide::Reset, 1.0, -0.5, 1, 1.0);
        assert_ne!(status, FndamStatus::Ok);
        let msg = CStr::from_ptr(fndam_last_error_message()).to_str().unwrap();
        assert!(!msg.is_empty());
        fndam_cell_free(cell);
        fndam_cell_free(ptr::null_mut());
    }
}

#[test]
fn array_state_round_trips_through_the_abi() {
    let p = fndam_default_params();
    let mut array = ptr::null_mut();
    unsafe {
        assert_eq!(fndam_array_new(8, &p, 7.5, 0.001, 11, &mut array), FndamStatus::Ok);
        assert_eq!(
            fndam_array_pulse(array, 3, FndamSide::Set, 1.0, 5e-4, 10, 1000.0, 0.02),
            FndamStatus::Ok
        );
        assert_eq!(fndam_array_advance(array, 5.0), FndamStatus::Ok);
        let mut n = 0;
        fndam_array_len(array, &mut n);
        assert_eq!(n, 8);
        let mut before = vec![0.0; n];
        assert_eq!(fndam_array_weights(array, before.as_mut_ptr(), n), FndamStatus::Ok);
        assert_eq!(fndam_array_weights(array, before.as_mut_ptr(), n - 1), FndamStatus::Argument);

        let mut doc = ptr::null_mut();
        assert_eq!(fndam_array_save_state(array, &mut doc), FndamStatus::Ok);
        let mut restored = ptr::null_mut();
        assert_eq!(fndam_array_load_state(doc, &mut restored), FndamStatus::Ok);
        let mut after = vec![0.0; n];
        fndam_array_weights(restored, after.as_mut_ptr(), n);
        assert_eq!(before, after);

        let garbage = CString::new("{\"schema\": 1}").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(fndam_array_load_state(garbage.as_ptr(), &mut none), FndamStatus::Parse);
        assert!(none.is_null());

        fndam_string_free(doc);
        fndam_array_free(array);
        fndam_array_free(restored);
    }
}

#[test]
fn write_energy_matches_the_library() {
    assert_eq!(fndam_write_energy(1e-12, 0.1), fndam::energy::write_energy(1e-12, 0.1));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("fndam.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for symbol in ["fndam_cell_new", "fndam_array_load_state", "FNDAM_STATUS_SATURATION", "FndamParams"] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler found; header syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
