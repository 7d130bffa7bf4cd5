//! Compile and run a real C client against the generated header and the
//! staticlib, proving the ABI surface is usable from C as built.

use std::path::PathBuf;
use std::process::Command;

const C_CLIENT: &str = r#"
#include <stdio.h>
#include <string.h>
#include "vecpipe.h"

int main(void) {
    VpFunction *f = NULL;
    const char *src =
        "void s000(int n, int *a, int *b) { for (int i = 0; i < n; i++) { a[i] = b[i] + 1; } }";
    if (vp_parse_function(src, &f) != VP_STATUS_OK) {
        fprintf(stderr, "parse: %s\n", vp_last_error());
        return 1;
    }
    char *printed = NULL;
    if (vp_print_function(f, &printed) != VP_STATUS_OK) return 2;
    if (strstr(printed, "void s000(int n, int *a, int *b)") == NULL) return 3;

    VpFunction *unrolled = NULL;
    if (vp_unroll_scalar(f, 8, &unrolled) != VP_STATUS_OK) return 4;

    double p = 0.0;
    if (vp_pass_at_k(10, 10, 1, &p) != VP_STATUS_OK || p != 1.0) return 5;

    VpFunction *bad = NULL;
    if (vp_parse_function("float nope;", &bad) != VP_STATUS_PARSE_ERROR) return 6;

    vp_string_free(printed);
    vp_function_free(unrolled);
    vp_function_free(f);
    printf("c client ok: version %s\n", vp_version());
    return 0;
}
"#;

#[test]
fn c_client_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    // the staticlib is built alongside this test's profile
    let profile_dir = {
        let exe = std::env::current_exe().unwrap();
        // target/<profile>/deps/<test-bin> -> target/<profile>
        exe.parent().unwrap().parent().unwrap().to_path_buf()
    };
    let staticlib = profile_dir.join("libvecpipe_ffi.a");
    if !staticlib.is_file() {
        eprintln!(
            "skipping: staticlib not found at {} (build with `cargo build -p vecpipe-ffi`)",
            staticlib.display()
        );
        return;
    }
    let cc = vecpipe::tools::Toolchain::discover().unwrap().cc;

    let dir = tempfile::tempdir().unwrap();
    let main_c = dir.path().join("main.c");
    std::fs::write(&main_c, C_CLIENT).unwrap();
    let bin = dir.path().join("client");
    let out = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&main_c)
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "link failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "client exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("c client ok"));
}
