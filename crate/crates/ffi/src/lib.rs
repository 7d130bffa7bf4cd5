//! C ABI over the vectorization pipeline: opaque function handles, status
//! codes, and a thread-local last-error message. Strings returned through
//! `char **` are owned by the caller and released with `vp_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use vecpipe::csubset::{ast_equal, parse_function, print_expr, print_function, SourceFunction};
use vecpipe::difftest::{run_checksum_test, TestConfig};
use vecpipe::loop_model::{
    compute_alignment, first_canonical_loop, plan_for_unroll_factor, sole_canonical_loop,
};
use vecpipe::tools::Toolchain;
use vecpipe::transforms::{externalize_arrays, unroll_scalar_c, TransformedPair};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpStatus {
    Ok = 0,
    /// The source text is outside the supported C subset.
    ParseError = 1,
    /// A null pointer or invalid value was passed in.
    InvalidArgument = 2,
    /// Loop analysis failed (no canonical loop, unsupported step, ...).
    AnalysisError = 3,
    /// A source rewrite could not be applied.
    TransformError = 4,
    /// An external tool (C compiler) failed or is missing.
    ToolError = 5,
    /// Input bytes were not valid UTF-8.
    Utf8Error = 6,
    /// Internal panic; details via vp_last_error.
    InternalError = 7,
}

/// Opaque parsed kernel function.
pub struct VpFunction {
    inner: SourceFunction,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg).unwrap_or_default();
    });
}

fn guard<F: FnOnce() -> VpStatus>(f: F) -> VpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            VpStatus::InternalError
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, VpStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(VpStatus::InvalidArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|e| {
        set_error(format!("invalid UTF-8: {e}"));
        VpStatus::Utf8Error
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> VpStatus {
    match CString::new(s.replace('\0', " ")) {
        Ok(cs) => {
            unsafe { *out = cs.into_raw() };
            VpStatus::Ok
        }
        Err(_) => {
            set_error("string contained an interior NUL");
            VpStatus::InternalError
        }
    }
}

/// Last error message for this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn vp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn vp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse one kernel function from C source text into an opaque handle.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_parse_function(
    source: *const c_char,
    out: *mut *mut VpFunction,
) -> VpStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return VpStatus::InvalidArgument;
        }
        let text = match read_str(source) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_function(text) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(VpFunction { inner: f }));
                VpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                VpStatus::ParseError
            }
        }
    })
}

/// Release a handle returned by any `vp_*` constructor.
///
/// # Safety
/// `f` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn vp_function_free(f: *mut VpFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Release a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn vp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Print a handle back to compilable C text.
///
/// # Safety
/// `f` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_print_function(
    f: *const VpFunction,
    out: *mut *mut c_char,
) -> VpStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            set_error("null argument");
            return VpStatus::InvalidArgument;
        }
        give_string(print_function(&(*f).inner), out)
    })
}

/// Structural equality under parse-time normalization.
///
/// # Safety
/// Both handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_ast_equal(
    a: *const VpFunction,
    b: *const VpFunction,
    out: *mut bool,
) -> VpStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            set_error("null argument");
            return VpStatus::InvalidArgument;
        }
        *out = ast_equal(&(*a).inner, &(*b).inner);
        VpStatus::Ok
    })
}

/// Compute the alignment plan for a scalar/vectorized loop pair: `v` is the
/// lcm of the two steps, `m = v / step1`, and `assumption` receives the
/// divisibility expression text (caller frees).
///
/// # Safety
/// Handles must be live; out-pointers may be null to skip an output.
#[no_mangle]
pub unsafe extern "C" fn vp_compute_alignment(
    src: *const VpFunction,
    vec: *const VpFunction,
    m_out: *mut u32,
    v_out: *mut u32,
    assumption_out: *mut *mut c_char,
) -> VpStatus {
    guard(|| {
        if src.is_null() || vec.is_null() {
            set_error("null function handle");
            return VpStatus::InvalidArgument;
        }
        let src_loop = match sole_canonical_loop(&(*src).inner) {
            Ok(l) => l,
            Err(e) => {
                set_error(format!("source: {e}"));
                return VpStatus::AnalysisError;
            }
        };
        let vec_loop = match first_canonical_loop(&(*vec).inner) {
            Ok(l) => l,
            Err(e) => {
                set_error(format!("vectorized: {e}"));
                return VpStatus::AnalysisError;
            }
        };
        match compute_alignment(&src_loop, &vec_loop) {
            Ok(plan) => {
                if !m_out.is_null() {
                    *m_out = plan.m;
                }
                if !v_out.is_null() {
                    *v_out = plan.v;
                }
                if !assumption_out.is_null() {
                    return give_string(print_expr(&plan.assumption), assumption_out);
                }
                VpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                VpStatus::AnalysisError
            }
        }
    })
}

/// Unroll the kernel's single loop `m` times at the C level.
///
/// # Safety
/// `f` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_unroll_scalar(
    f: *const VpFunction,
    m: u32,
    out: *mut *mut VpFunction,
) -> VpStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            set_error("null argument");
            return VpStatus::InvalidArgument;
        }
        let plan = match plan_for_unroll_factor(&(*f).inner, m) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return VpStatus::AnalysisError;
            }
        };
        match unroll_scalar_c(&(*f).inner, &plan) {
            Ok(u) => {
                *out = Box::into_raw(Box::new(VpFunction { inner: u }));
                VpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                VpStatus::TransformError
            }
        }
    })
}

/// Move array parameters of both functions to file-scope extern arrays,
/// identically on both sides.
///
/// # Safety
/// Handles must be live; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vp_externalize_arrays(
    src: *const VpFunction,
    vec: *const VpFunction,
    src_out: *mut *mut VpFunction,
    vec_out: *mut *mut VpFunction,
) -> VpStatus {
    guard(|| {
        if src.is_null() || vec.is_null() || src_out.is_null() || vec_out.is_null() {
            set_error("null argument");
            return VpStatus::InvalidArgument;
        }
        // a unit plan: externalization does not consult it
        let plan = vecpipe::loop_model::AlignmentPlan {
            v: 1,
            m: 1,
            assumption: vecpipe::csubset::Expr::Int(1),
            vector_unroll: 1,
        };
        let pair = TransformedPair::new((*src).inner.clone(), (*vec).inner.clone(), plan);
        match externalize_arrays(pair) {
            Ok(done) => {
                *src_out = Box::into_raw(Box::new(VpFunction { inner: done.src }));
                *vec_out = Box::into_raw(Box::new(VpFunction { inner: done.vec }));
                VpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                VpStatus::TransformError
            }
        }
    })
}

/// pass@k = 1 - C(n-c,k)/C(n,k), exact for n <= 100.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vp_pass_at_k(n: u64, c: u64, k: u64, out: *mut f64) -> VpStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return VpStatus::InvalidArgument;
        }
        match vecpipe::difftest::pass_at_k(n, c, k) {
            Ok(v) => {
                *out = v;
                VpStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                VpStatus::InvalidArgument
            }
        }
    })
}

/// Checksum-test a candidate (raw C text) against a scalar kernel (raw C
/// text). On success `verdict_json_out` receives the verdict record as JSON
/// (caller frees). Requires a C compiler on PATH.
///
/// # Safety
/// String arguments must be NUL-terminated; `verdict_json_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vp_run_checksum_test(
    src_text: *const c_char,
    candidate_text: *const c_char,
    trip_count: u32,
    trials: u32,
    seed: u64,
    verdict_json_out: *mut *mut c_char,
) -> VpStatus {
    guard(|| {
        if verdict_json_out.is_null() {
            set_error("null output pointer");
            return VpStatus::InvalidArgument;
        }
        let src_text = match read_str(src_text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let candidate = match read_str(candidate_text) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let src = match parse_function(src_text) {
            Ok(f) => f,
            Err(e) => {
                set_error(e.to_string());
                return VpStatus::ParseError;
            }
        };
        let toolchain = match Toolchain::discover() {
            Ok(tc) => tc,
            Err(e) => {
                set_error(e.to_string());
                return VpStatus::ToolError;
            }
        };
        let cfg = TestConfig {
            trip_count,
            trials,
            seed,
            ..TestConfig::default()
        };
        match run_checksum_test(&src, candidate, &cfg, &toolchain) {
            Ok(verdict) => match serde_json::to_string(&verdict) {
                Ok(json) => give_string(json, verdict_json_out),
                Err(e) => {
                    set_error(e.to_string());
                    VpStatus::InternalError
                }
            },
            Err(e) => {
                set_error(e.to_string());
                VpStatus::ToolError
            }
        }
    })
}
