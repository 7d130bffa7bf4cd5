//! Exercise the C ABI from Rust: handle lifecycle, status codes, error
//! paths, and the generated header.

use std::ffi::{CStr, CString};
use std::ptr;
use vecpipe_ffi::*;

const S212: &str = "void s212(int n, int *a, int *b, int *c, int *d) { for (int i = 0; i < n - 1; i++) { a[i] *= c[i]; b[i] += a[i + 1] * d[i]; } }";

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn last_error() -> String {
    CStr::from_ptr(vp_last_error())
        .to_string_lossy()
        .into_owned()
}

#[test]
fn parse_print_round_trip_through_the_abi() {
    unsafe {
        let mut f: *mut VpFunction = ptr::null_mut();
        let status = vp_parse_function(cstr(S212).as_ptr(), &mut f);
        assert_eq!(status, VpStatus::Ok);
        assert!(!f.is_null());

        let mut printed: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(vp_print_function(f, &mut printed), VpStatus::Ok);
        let text = CStr::from_ptr(printed).to_str().unwrap().to_string();
        assert!(text.contains("void s212(int n, int *a, int *b, int *c, int *d)"));

        let mut f2: *mut VpFunction = ptr::null_mut();
        assert_eq!(
            vp_parse_function(cstr(&text).as_ptr(), &mut f2),
            VpStatus::Ok
        );
        let mut equal = false;
        assert_eq!(vp_ast_equal(f, f2, &mut equal), VpStatus::Ok);
        assert!(equal);

        vp_string_free(printed);
        vp_function_free(f);
        vp_function_free(f2);
    }
}

#[test]
fn parse_errors_carry_messages() {
    unsafe {
        let mut f: *mut VpFunction = ptr::null_mut();
        let status = vp_parse_function(cstr("struct nope {};").as_ptr(), &mut f);
        assert_eq!(status, VpStatus::ParseError);
        assert!(f.is_null());
        assert!(last_error().contains("parse error"), "{}", last_error());

        assert_eq!(
            vp_parse_function(ptr::null(), &mut f),
            VpStatus::InvalidArgument
        );
    }
}

#[test]
fn alignment_through_the_abi() {
    unsafe {
        let mut src: *mut VpFunction = ptr::null_mut();
        let mut vec: *mut VpFunction = ptr::null_mut();
        vp_parse_function(cstr(S212).as_ptr(), &mut src);
        let vec_text = "void s212(int n, int *a, int *b, int *c, int *d) { int i; for (i = 0; i < n - 1 - (n - 1) % 8; i += 8) { a[i] = 0; } for (; i < n - 1; i++) { a[i] = 0; } }";
        vp_parse_function(cstr(vec_text).as_ptr(), &mut vec);

        let (mut m, mut v) = (0u32, 0u32);
        let mut assumption: *mut std::ffi::c_char = ptr::null_mut();
        let status = vp_compute_alignment(src, vec, &mut m, &mut v, &mut assumption);
        assert_eq!(status, VpStatus::Ok);
        assert_eq!((m, v), (8, 8));
        let text = CStr::from_ptr(assumption).to_str().unwrap();
        assert_eq!(text, "(n - 1 - 0) % 8 == 0");
        vp_string_free(assumption);
        vp_function_free(src);
        vp_function_free(vec);
    }
}

#[test]
fn unroll_and_externalize_produce_new_handles() {
    unsafe {
        let mut f: *mut VpFunction = ptr::null_mut();
        vp_parse_function(cstr(S212).as_ptr(), &mut f);

        let mut unrolled: *mut VpFunction = ptr::null_mut();
        assert_eq!(vp_unroll_scalar(f, 4, &mut unrolled), VpStatus::Ok);
        let mut printed: *mut std::ffi::c_char = ptr::null_mut();
        vp_print_function(unrolled, &mut printed);
        let text = CStr::from_ptr(printed).to_str().unwrap();
        assert_eq!(text.matches("a[i] *= c[i];").count(), 4);
        vp_string_free(printed);

        // zero factor is rejected at the analysis layer
        let mut bad: *mut VpFunction = ptr::null_mut();
        assert_eq!(vp_unroll_scalar(f, 0, &mut bad), VpStatus::AnalysisError);

        let mut esrc: *mut VpFunction = ptr::null_mut();
        let mut evec: *mut VpFunction = ptr::null_mut();
        assert_eq!(
            vp_externalize_arrays(f, f, &mut esrc, &mut evec),
            VpStatus::Ok
        );
        let mut printed: *mut std::ffi::c_char = ptr::null_mut();
        vp_print_function(esrc, &mut printed);
        let text = CStr::from_ptr(printed).to_str().unwrap();
        assert!(text.contains("extern int a[];"));
        assert!(text.contains("void s212(int n)"));
        vp_string_free(printed);
        vp_function_free(esrc);
        vp_function_free(evec);
        vp_function_free(unrolled);
        vp_function_free(f);
    }
}

#[test]
fn pass_at_k_through_the_abi() {
    unsafe {
        let mut out = 0.0f64;
        assert_eq!(vp_pass_at_k(4, 2, 2, &mut out), VpStatus::Ok);
        assert_eq!(out, 5.0 / 6.0);
        assert_eq!(vp_pass_at_k(4, 5, 1, &mut out), VpStatus::InvalidArgument);
    }
}

#[test]
fn checksum_test_through_the_abi() {
    unsafe {
        let mut verdict: *mut std::ffi::c_char = ptr::null_mut();
        let status = vp_run_checksum_test(
            cstr(S212).as_ptr(),
            cstr(S212).as_ptr(),
            64,
            2,
            7,
            &mut verdict,
        );
        assert_eq!(status, VpStatus::Ok, "{}", last_error());
        let json = CStr::from_ptr(verdict).to_str().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(parsed["verdict"], "plausible");
        vp_string_free(verdict);
    }
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/vecpipe.h");
    let text = std::fs::read_to_string(&header)
        .unwrap_or_else(|e| panic!("missing generated header {}: {e}", header.display()));
    for symbol in [
        "typedef struct VpFunction VpFunction;",
        "vp_parse_function",
        "vp_print_function",
        "vp_function_free",
        "vp_string_free",
        "vp_ast_equal",
        "vp_compute_alignment",
        "vp_unroll_scalar",
        "vp_externalize_arrays",
        "vp_pass_at_k",
        "vp_run_checksum_test",
        "vp_last_error",
        "VP_STATUS_OK",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}:\n{text}");
    }
}

#[test]
fn version_string_is_static() {
    unsafe {
        let v = CStr::from_ptr(vp_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
