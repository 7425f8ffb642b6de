//! C ABI for the reaction-network toolkit: opaque handles, integer status
//! codes, and JSON / text strings for structured results.
//!
//! Conventions:
//! - Every fallible call returns a `CrnStatus` (0 = success). On failure a
//!   thread-local message is available via `crn_last_error_message`.
//! - Handles are created by `*_parse` calls and released by the matching
//!   `*_free`; passing them to any other thread is safe, sharing them across
//!   simultaneous calls is the caller's responsibility.
//! - Strings returned through `char **` out-parameters are NUL-terminated
//!   UTF-8 owned by the library; release them with `crn_string_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use crn_multiscale::network::{Network, State};
use crn_multiscale::parse::{parse_network, parse_scaling};
use crn_multiscale::rational::parse_rational;
use crn_multiscale::report::{balance_report_json, scaling_json};
use crn_multiscale::reduce::{build_limit_model, format_limit_model};
use crn_multiscale::rng::RngStream;
use crn_multiscale::scaling::{verify_all_balance, ScalingSpec, DEFAULT_SIGN_BUDGET};
use crn_multiscale::sim::{simulate_ssa, SsaOptions};

/// Status codes returned by every fallible entry point.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    AnalysisError = 5,
    SimulationError = 6,
    Panic = 7,
}

/// Opaque reaction network handle.
pub struct CrnNetwork {
    inner: Network,
}

/// Opaque scaling-specification handle (abundance and rate exponents).
pub struct CrnScaling {
    inner: ScalingSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(status: CrnStatus, message: impl Into<String>) -> i32 {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(bytes).expect("NUL bytes stripped");
    });
    status as i32
}

fn ok() -> i32 {
    CrnStatus::Ok as i32
}

/// Run `f` catching panics so they never unwind across the FFI boundary.
fn guarded(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => set_error(CrnStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        return Err(set_error(CrnStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error(CrnStatus::InvalidUtf8, "string is not valid UTF-8"))
}

fn give_string(out: *mut *mut c_char, s: String) -> i32 {
    if out.is_null() {
        return set_error(CrnStatus::NullPointer, "null output pointer");
    }
    let mut bytes = s.into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("NUL bytes stripped");
    unsafe { *out = c.into_raw() };
    ok()
}

/// Library version string; statically allocated, do not free.
#[no_mangle]
pub extern "C" fn crn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn crn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library.
#[no_mangle]
pub unsafe extern "C" fn crn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a network description (the `.crn` text format) into a handle.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crn_network_parse(
    text: *const c_char,
    out: *mut *mut CrnNetwork,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            return set_error(CrnStatus::NullPointer, "null output pointer");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(code) => return code,
        };
        match parse_network(text).into_result() {
            Ok((network, _warnings)) => {
                *out = Box::into_raw(Box::new(CrnNetwork { inner: network }));
                ok()
            }
            Err(diags) => {
                let msg =
                    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
                set_error(CrnStatus::ParseError, msg)
            }
        }
    })
}

/// # Safety
/// `network` must be null or a handle from `crn_network_parse`.
#[no_mangle]
pub unsafe extern "C" fn crn_network_free(network: *mut CrnNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Number of species, or -1 for a null handle.
///
/// # Safety
/// `network` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn crn_network_species_count(network: *const CrnNetwork) -> i64 {
    network.as_ref().map_or(-1, |n| n.inner.n_species() as i64)
}

/// Number of reactions, or -1 for a null handle.
///
/// # Safety
/// `network` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn crn_network_reaction_count(network: *const CrnNetwork) -> i64 {
    network.as_ref().map_or(-1, |n| n.inner.n_reactions() as i64)
}

/// Name of species `index`; returned string is freed with `crn_string_free`.
///
/// # Safety
/// Pointer arguments must be valid.
#[no_mangle]
pub unsafe extern "C" fn crn_network_species_name(
    network: *const CrnNetwork,
    index: u64,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let Some(network) = network.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null network handle");
        };
        let Some(species) = network.inner.species.get(index as usize) else {
            return set_error(
                CrnStatus::InvalidArgument,
                format!("species index {index} out of range"),
            );
        };
        give_string(out, species.name.clone())
    })
}

/// Round-trip serialization of the network in the `.crn` format.
///
/// # Safety
/// Pointer arguments must be valid.
#[no_mangle]
pub unsafe extern "C" fn crn_network_format(
    network: *const CrnNetwork,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let Some(network) = network.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null network handle");
        };
        give_string(out, crn_multiscale::parse::format_network(&network.inner))
    })
}

/// Parse a scaling specification (the `.scale` text format) against a network.
///
/// # Safety
/// Pointer arguments must be valid.
#[no_mangle]
pub unsafe extern "C" fn crn_scaling_parse(
    text: *const c_char,
    network: *const CrnNetwork,
    out: *mut *mut CrnScaling,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            return set_error(CrnStatus::NullPointer, "null output pointer");
        }
        let Some(network) = network.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null network handle");
        };
        let text = match read_str(text) {
            Ok(t) => t,
            Err(code) => return code,
        };
        match parse_scaling(text, &network.inner).into_result() {
            Ok((spec, _warnings)) => {
                *out = Box::into_raw(Box::new(CrnScaling { inner: spec }));
                ok()
            }
            Err(diags) => {
                let msg =
                    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
                set_error(CrnStatus::ParseError, msg)
            }
        }
    })
}

/// # Safety
/// `scaling` must be null or a handle from `crn_scaling_parse`.
#[no_mangle]
pub unsafe extern "C" fn crn_scaling_free(scaling: *mut CrnScaling) {
    if !scaling.is_null() {
        drop(Box::from_raw(scaling));
    }
}

/// Balance-condition report at the time-scale exponent `gamma` (an exact
/// rational like "0", "-2", "1/2") as a JSON document.
///
/// # Safety
/// Pointer arguments must be valid.
#[no_mangle]
pub unsafe extern "C" fn crn_balance_report_json(
    network: *const CrnNetwork,
    scaling: *const CrnScaling,
    gamma: *const c_char,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let Some(network) = network.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null network handle");
        };
        let Some(scaling) = scaling.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null scaling handle");
        };
        let gamma_text = match read_str(gamma) {
            Ok(t) => t,
            Err(code) => return code,
        };
        let Some(g) = parse_rational(gamma_text) else {
            return set_error(
                CrnStatus::InvalidArgument,
                format!("invalid rational gamma: {gamma_text}"),
            );
        };
        match verify_all_balance(&network.inner, &scaling.inner, &g, DEFAULT_SIGN_BUDGET) {
            Ok(report) => {
                let doc = serde_json::json!({
                    "scaling": scaling_json(&network.inner, &scaling.inner),
                    "report": balance_report_json(&network.inner, &report),
                });
                give_string(out, doc.to_string())
            }
            Err(e) => set_error(CrnStatus::AnalysisError, e.to_string()),
        }
    })
}

/// Limiting model at `gamma`, serialized in the annotated `.crn` format.
///
/// # Safety
/// Pointer arguments must be valid.
#[no_mangle]
pub unsafe extern "C" fn crn_limit_model_format(
    network: *const CrnNetwork,
    scaling: *const CrnScaling,
    gamma: *const c_char,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let Some(network) = network.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null network handle");
        };
        let Some(scaling) = scaling.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null scaling handle");
        };
        let gamma_text = match read_str(gamma) {
            Ok(t) => t,
            Err(code) => return code,
        };
        let Some(g) = parse_rational(gamma_text) else {
            return set_error(
                CrnStatus::InvalidArgument,
                format!("invalid rational gamma: {gamma_text}"),
            );
        };
        match build_limit_model(&network.inner, &scaling.inner, &g, &[]) {
            Ok(model) => give_string(out, format_limit_model(&model)),
            Err(e) => set_error(CrnStatus::AnalysisError, e.to_string()),
        }
    })
}

/// Exact SSA sample path recorded on a time grid.
///
/// `x0` holds one nonnegative initial count per species; `grid` holds
/// `grid_len` nondecreasing times in `[0, t_end]`; `out` receives
/// `grid_len * n_species` counts in row-major order (time-major). The path is
/// a pure function of `(seed, stream)`.
///
/// # Safety
/// Pointer arguments must be valid and the buffers at least as long as
/// documented above.
#[no_mangle]
pub unsafe extern "C" fn crn_simulate_ssa(
    network: *const CrnNetwork,
    x0: *const i64,
    n_species: u64,
    t_end: f64,
    seed: u64,
    stream: u64,
    grid: *const f64,
    grid_len: u64,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        let Some(network) = network.as_ref() else {
            return set_error(CrnStatus::NullPointer, "null network handle");
        };
        if x0.is_null() || grid.is_null() || out.is_null() {
            return set_error(CrnStatus::NullPointer, "null buffer argument");
        }
        if n_species as usize != network.inner.n_species() {
            return set_error(
                CrnStatus::InvalidArgument,
                format!(
                    "n_species is {n_species}, network has {}",
                    network.inner.n_species()
                ),
            );
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return set_error(CrnStatus::InvalidArgument, "t_end must be positive and finite");
        }
        let x0 = std::slice::from_raw_parts(x0, n_species as usize);
        if x0.iter().any(|&c| c < 0) {
            return set_error(CrnStatus::InvalidArgument, "initial counts must be nonnegative");
        }
        let grid = std::slice::from_raw_parts(grid, grid_len as usize);
        if grid.windows(2).any(|w| w[0] > w[1])
            || grid.iter().any(|&t| !(0.0..=t_end).contains(&t))
        {
            return set_error(
                CrnStatus::InvalidArgument,
                "grid must be nondecreasing within [0, t_end]",
            );
        }
        let out = std::slice::from_raw_parts_mut(out, (grid_len as usize) * x0.len());

        let mut rng = RngStream::new(seed, stream);
        let opts = SsaOptions { grid, record_events: false, ..SsaOptions::default() };
        match simulate_ssa(&network.inner, &State::new(x0.to_vec()), t_end, &mut rng, &opts) {
            Ok(traj) => {
                for (j, row) in traj.grid_states.iter().enumerate() {
                    out[j * row.len()..(j + 1) * row.len()].copy_from_slice(row);
                }
                ok()
            }
            Err(e) => set_error(CrnStatus::SimulationError, e.to_string()),
        }
    })
}
