//! End-to-end exercise of the C ABI from Rust, including error paths.

use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use crn_multiscale_capi::*;

const NETWORK: &str = "# crn-v1
species A, B, C
A -> B @ 2.0
B <-> C @ 3.0, 1.0
";

const SCALING: &str = "# crn-scale-v1
N0 = 100
alpha.A = 1
alpha.B = 1
alpha.C = 1
";

fn c(text: &str) -> CString {
    CString::new(text).unwrap()
}

unsafe fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let s = CStr::from_ptr(ptr).to_str().unwrap().to_owned();
    crn_string_free(ptr);
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(crn_last_error_message()).to_str().unwrap().to_owned() }
}

#[test]
fn parse_inspect_format_free() {
    unsafe {
        let mut net: *mut CrnNetwork = ptr::null_mut();
        assert_eq!(crn_network_parse(c(NETWORK).as_ptr(), &mut net), 0);
        assert_eq!(crn_network_species_count(net), 3);
        assert_eq!(crn_network_reaction_count(net), 3);

        let mut name: *mut c_char = ptr::null_mut();
        assert_eq!(crn_network_species_name(net, 1, &mut name), 0);
        assert_eq!(take_string(name), "B");
        assert_ne!(crn_network_species_name(net, 99, &mut name), 0);
        assert!(last_error().contains("out of range"));

        let mut text: *mut c_char = ptr::null_mut();
        assert_eq!(crn_network_format(net, &mut text), 0);
        let round_trip = take_string(text);
        assert!(round_trip.contains("A -> B"));

        crn_network_free(net);
    }
}

#[test]
fn parse_error_reports_diagnostics() {
    unsafe {
        let mut net: *mut CrnNetwork = ptr::null_mut();
        let bad = c("species A\nA -> B @ -1.0\n");
        assert_eq!(crn_network_parse(bad.as_ptr(), &mut net), CrnStatus::ParseError as i32);
        assert!(!last_error().is_empty());
        assert_eq!(
            crn_network_parse(ptr::null(), &mut net),
            CrnStatus::NullPointer as i32
        );
    }
}

#[test]
fn balance_report_and_limit_model() {
    unsafe {
        let mut net: *mut CrnNetwork = ptr::null_mut();
        assert_eq!(crn_network_parse(c(NETWORK).as_ptr(), &mut net), 0);
        let mut sc: *mut CrnScaling = ptr::null_mut();
        assert_eq!(crn_scaling_parse(c(SCALING).as_ptr(), net, &mut sc), 0);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(crn_balance_report_json(net, sc, c("0").as_ptr(), &mut json), 0);
        let doc: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(doc["report"]["gamma"], "0");
        assert_eq!(doc["report"]["species"].as_array().unwrap().len(), 3);

        assert_ne!(crn_balance_report_json(net, sc, c("x/y").as_ptr(), &mut json), 0);
        assert!(last_error().contains("invalid rational"));

        let mut model: *mut c_char = ptr::null_mut();
        assert_eq!(crn_limit_model_format(net, sc, c("0").as_ptr(), &mut model), 0);
        assert!(take_string(model).contains("limit model at gamma = 0"));

        crn_scaling_free(sc);
        crn_network_free(net);
    }
}

#[test]
fn ssa_is_deterministic_and_validates_arguments() {
    unsafe {
        let mut net: *mut CrnNetwork = ptr::null_mut();
        assert_eq!(crn_network_parse(c(NETWORK).as_ptr(), &mut net), 0);
        let x0 = [100i64, 0, 0];
        let grid = [0.0, 0.5, 1.0];
        let mut out_a = [0.0f64; 9];
        let mut out_b = [0.0f64; 9];
        let status = crn_simulate_ssa(
            net,
            x0.as_ptr(),
            3,
            1.0,
            42,
            0,
            grid.as_ptr(),
            3,
            out_a.as_mut_ptr(),
        );
        assert_eq!(status, 0, "{}", last_error());
        assert_eq!(
            crn_simulate_ssa(net, x0.as_ptr(), 3, 1.0, 42, 0, grid.as_ptr(), 3, out_b.as_mut_ptr()),
            0
        );
        assert_eq!(out_a, out_b, "same seed and stream must give the same path");
        // Total copy number is conserved by the three conversions.
        for row in out_a.chunks(3) {
            assert_eq!(row.iter().sum::<f64>(), 100.0);
        }
        assert_eq!(out_a[..3], [100.0, 0.0, 0.0]);

        assert_eq!(
            crn_simulate_ssa(net, x0.as_ptr(), 2, 1.0, 42, 0, grid.as_ptr(), 3, out_a.as_mut_ptr()),
            CrnStatus::InvalidArgument as i32
        );
        let bad_grid = [0.5, 0.1];
        assert_eq!(
            crn_simulate_ssa(
                net,
                x0.as_ptr(),
                3,
                1.0,
                42,
                0,
                bad_grid.as_ptr(),
                2,
                out_a.as_mut_ptr()
            ),
            CrnStatus::InvalidArgument as i32
        );
        crn_network_free(net);
    }
}

#[test]
fn version_is_exposed() {
    let v = unsafe { CStr::from_ptr(crn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
