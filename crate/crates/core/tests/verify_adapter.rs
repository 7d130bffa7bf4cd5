//! Drive the validator adapter end-to-end against mock validators: argument
//! templating, IR plumbing, wall-clock kill, and output classification all
//! run for real; only the SMT solving is faked.

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use vecpipe::csubset::parse_function;
use vecpipe::difftest::TestConfig;
use vecpipe::loop_model::{compute_alignment, sole_canonical_loop};
use vecpipe::tools::Toolchain;
use vecpipe::verify::*;

fn corpus(rel: &str) -> vecpipe::csubset::SourceFunction {
    let full = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(rel);
    parse_function(&std::fs::read_to_string(full).unwrap()).unwrap()
}

fn mock_validator(dir: &Path, name: &str, script_body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{script_body}\n")).unwrap();
    let mut perms = std::fs::metadata(&path).unwrap().permissions();
    perms.set_mode(0o755);
    std::fs::set_permissions(&path, perms).unwrap();
    path
}

fn cfg_with(validator: PathBuf) -> ToolConfig {
    ToolConfig {
        validator_path: validator,
        timeout_secs: 2,
        ..ToolConfig::default()
    }
}

fn skip_without_clang() -> bool {
    if vecpipe::tools::find_in_path("clang").is_none() {
        eprintln!("skipping: clang not installed");
        return true;
    }
    false
}

#[test]
fn full_driver_with_accepting_validator() {
    if skip_without_clang() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    // the mock also records its arguments so templating is checkable
    let validator = mock_validator(
        dir.path(),
        "alive-tv-ok",
        &format!(
            "echo \"$@\" > {}/args.txt\necho 'Transformation seems to be correct!'",
            dir.path().display()
        ),
    );
    let cfg = cfg_with(validator);
    let tc = Toolchain::discover().unwrap();
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let result = check_equivalence(
        &src,
        &vec,
        &cfg,
        &TestConfig {
            trip_count: 64,
            trials: 2,
            ..TestConfig::default()
        },
        &tc,
        Some(&vecpipe::difftest::Verdict::Plausible),
    )
    .unwrap();
    let EquivResult::Equivalent { unroll_m, .. } = result else {
        panic!("expected Equivalent, got {result:?}");
    };
    // every Equivalent verdict carries its unroll bound
    assert_eq!(unroll_m, 8);
    let args = std::fs::read_to_string(dir.path().join("args.txt")).unwrap();
    assert!(args.contains("--src-unroll=8"), "{args}");
    assert!(args.contains("--tgt-unroll=1"), "{args}");
    assert!(args.contains("--smt-to=2000"), "{args}");
    assert!(args.contains("src.ll") && args.contains("tgt.ll"), "{args}");
}

#[test]
fn refuting_validator_stops_at_stage_one() {
    if skip_without_clang() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let validator = mock_validator(
        dir.path(),
        "alive-tv-refute",
        "echo \"Transformation doesn't verify!\"\necho \"ERROR: Value mismatch\"",
    );
    let cfg = cfg_with(validator);
    let tc = Toolchain::discover().unwrap();
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let result = check_equivalence(
        &src,
        &vec,
        &cfg,
        &TestConfig {
            trip_count: 64,
            trials: 2,
            ..TestConfig::default()
        },
        &tc,
        Some(&vecpipe::difftest::Verdict::Plausible),
    )
    .unwrap();
    assert!(
        matches!(result, EquivResult::Inequivalent { .. }),
        "{result:?}"
    );
}

#[test]
fn hanging_validator_times_out_then_splitting_decides() {
    if skip_without_clang() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    // first two stages hang (killed at the wall clock); each split query
    // then succeeds, so the driver lands on Equivalent via stage 3
    let counter = dir.path().join("calls");
    let validator = mock_validator(
        dir.path(),
        "alive-tv-flaky",
        &format!(
            "echo x >> {c}\nn=$(wc -l < {c})\nif [ \"$n\" -le 2 ]; then sleep 60; fi\necho 'Transformation seems to be correct!'",
            c = counter.display()
        ),
    );
    let cfg = ToolConfig {
        validator_path: validator,
        timeout_secs: 1,
        validator_args: vec![
            "--src-unroll={src_unroll}".to_string(),
            "--tgt-unroll={tgt_unroll}".to_string(),
        ],
        ..ToolConfig::default()
    };
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let sl = sole_canonical_loop(&src).unwrap();
    let vl = sole_canonical_loop(&vec).unwrap();
    let plan = compute_alignment(&sl, &vl).unwrap();

    let t0 = std::time::Instant::now();
    let stage1 = check_with_alive2_unroll(&src, &vec, &plan, &cfg).unwrap();
    assert!(
        matches!(
            stage1,
            EquivResult::Inconclusive {
                cause: InconclusiveCause::Timeout,
                ..
            }
        ),
        "{stage1:?}"
    );
    assert!(t0.elapsed().as_secs() < 20, "kill did not honor the cap");

    let stage2 = check_with_c_unroll(&src, &vec, &plan, &cfg).unwrap();
    assert!(stage2.is_inconclusive(), "{stage2:?}");

    let stage3 = check_with_spatial_splitting(&src, &vec, &plan, &cfg).unwrap();
    let EquivResult::Equivalent { unroll_m, .. } = stage3 else {
        panic!("expected Equivalent from splitting, got {stage3:?}");
    };
    assert_eq!(unroll_m, 8);
    // 2 hung stages + 8 split queries
    let calls = std::fs::read_to_string(&counter).unwrap().lines().count();
    assert_eq!(calls, 10);
}

#[test]
fn split_refutation_wins_over_other_lanes() {
    if skip_without_clang() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let counter = dir.path().join("calls");
    // third query refutes; everything else verifies
    let validator = mock_validator(
        dir.path(),
        "alive-tv-lane3",
        &format!(
            "echo x >> {c}\nn=$(wc -l < {c})\nif [ \"$n\" -eq 3 ]; then echo \"Transformation doesn't verify!\"; else echo 'Transformation seems to be correct!'; fi",
            c = counter.display()
        ),
    );
    let cfg = cfg_with(validator);
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let sl = sole_canonical_loop(&src).unwrap();
    let vl = sole_canonical_loop(&vec).unwrap();
    let plan = compute_alignment(&sl, &vl).unwrap();
    let result = check_with_spatial_splitting(&src, &vec, &plan, &cfg).unwrap();
    let EquivResult::Inequivalent { counterexample } = result else {
        panic!("one refuted lane must refute the pair");
    };
    assert!(counterexample.contains("j=2"), "{counterexample}");
}

#[test]
fn nested_pair_gate_rejects_differing_outer_loops() {
    if skip_without_clang() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let validator = mock_validator(
        dir.path(),
        "alive-tv-unused",
        "echo 'Transformation seems to be correct!'",
    );
    let cfg = cfg_with(validator);
    let tc = Toolchain::discover().unwrap();
    let src = parse_function(
        "void f(int n, int *a) { for (int j = 0; j < n; j++) { for (int i = 0; i < n; i++) { a[i] = a[i] + j; } } }",
    )
    .unwrap();
    let vec = parse_function(
        "void f(int n, int *a) { for (int j = 0; j < n - 1; j++) { for (int i = 0; i < n; i += 8) { a[i] = a[i] + j; } } }",
    )
    .unwrap();
    let result = check_equivalence(
        &src,
        &vec,
        &cfg,
        &TestConfig::default(),
        &tc,
        Some(&vecpipe::difftest::Verdict::Plausible),
    )
    .unwrap();
    // every stage rejects (the nest gate at stages 1-2, the single-loop
    // precondition at stage 3); the driver reports the last stage's result
    let EquivResult::Inconclusive { cause, detail } = result else {
        panic!("expected analysis rejection, got {result:?}");
    };
    assert_eq!(cause, InconclusiveCause::AnalysisRejected);
    assert!(!detail.is_empty());
}

#[test]
fn archived_artifacts_land_in_work_dir() {
    if skip_without_clang() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let validator = mock_validator(
        dir.path(),
        "alive-tv-ok",
        "echo 'Transformation seems to be correct!'",
    );
    let work = dir.path().join("work");
    let cfg = ToolConfig {
        validator_path: validator,
        work_dir: Some(work.clone()),
        ..ToolConfig::default()
    };
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let sl = sole_canonical_loop(&src).unwrap();
    let vl = sole_canonical_loop(&vec).unwrap();
    let plan = compute_alignment(&sl, &vl).unwrap();
    check_with_alive2_unroll(&src, &vec, &plan, &cfg).unwrap();
    let q = work.join("alive2-unroll");
    assert!(q.join("src.ll").is_file());
    assert!(q.join("tgt.ll").is_file());
    assert!(q.join("validator.out").is_file());
    let src_ir = std::fs::read_to_string(q.join("src.ll")).unwrap();
    assert!(
        src_ir.contains("llvm.assume"),
        "assumption missing from archived IR"
    );
    assert!(
        src_ir.contains("@a") && src_ir.contains("@b"),
        "externalized arrays missing"
    );
}
