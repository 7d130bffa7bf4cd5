//! Machine-checkable consequences of the analysis and transform contracts
//! that need the compiler: reverse-iteration soundness for splitting-eligible
//! pairs, unroll label/declaration hygiene, and externalization symmetry.

use std::path::PathBuf;
use vecpipe::csubset::*;
use vecpipe::difftest::{run_checksum_test, TestConfig, Verdict};
use vecpipe::loop_model::*;
use vecpipe::tools::{run_command, split_flags, Toolchain};
use vecpipe::transforms::*;

fn corpus(path: &str) -> SourceFunction {
    let full = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(path);
    parse_function(&std::fs::read_to_string(&full).unwrap())
        .unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn quick_cfg() -> TestConfig {
    TestConfig {
        trip_count: 128,
        trials: 3,
        seed: 0xFEED,
        ..TestConfig::default()
    }
}

/// Build the same loop running its iterations in reverse order.
fn reversed_loop(f: &SourceFunction) -> SourceFunction {
    let cl = sole_canonical_loop(f).unwrap();
    assert_eq!(
        cl.direction,
        Direction::Inc,
        "helper expects an incrementing loop"
    );
    assert_eq!(cl.step, Expr::Int(1), "helper expects unit stride");
    let mut out = f.clone();
    let pos = out
        .body
        .iter()
        .position(|s| matches!(s, Stmt::For(_)))
        .unwrap();
    let Stmt::For(fl) = &mut out.body[pos] else {
        unreachable!()
    };
    // for (i = end - 1; i >= start; i--)
    fl.init = Some(ForInit::Decl {
        ty: CType::Int,
        name: cl.iterator.clone(),
        value: Expr::binary(BinOp::Sub, cl.end.clone(), Expr::Int(1)),
    });
    fl.cond = Some(Expr::binary(
        BinOp::Ge,
        Expr::Var(cl.iterator.clone()),
        cl.start.clone(),
    ));
    fl.step = Some(ForStep {
        var: cl.iterator.clone(),
        dir: StepDir::Dec,
        amount: Expr::Int(1),
    });
    out
}

#[test]
fn eligible_pairs_survive_iteration_reversal() {
    // no loop-carried dependence means running the source loop backwards
    // cannot change its outputs
    let tc = Toolchain::discover().unwrap();
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let report = check_splitting_eligibility(&src, &vec);
    assert!(report.eligible_for_splitting, "{:?}", report.reasons);

    let reversed = reversed_loop(&src);
    let verdict = run_checksum_test(&src, &print_function(&reversed), &quick_cfg(), &tc).unwrap();
    assert_eq!(verdict, Verdict::Plausible, "reversal changed outputs");

    // and a knowingly carried-dependence kernel does fail under reversal,
    // which is what makes the check meaningful
    let s112_like = parse_function(
        "void f(int n, int *a, int *b) { for (int i = 0; i < n - 1; i++) { a[i + 1] = a[i] + b[i]; } }",
    )
    .unwrap();
    let report = check_splitting_eligibility(&s112_like, &vec);
    assert!(!report.eligible_for_splitting);
    let reversed = reversed_loop(&s112_like);
    let verdict =
        run_checksum_test(&s112_like, &print_function(&reversed), &quick_cfg(), &tc).unwrap();
    assert!(matches!(verdict, Verdict::Inequivalent { .. }));
}

#[test]
fn unrolled_labels_unique_and_resolved() {
    let src = corpus("s278.c");
    let sl = sole_canonical_loop(&src).unwrap();
    let vl = sole_canonical_loop(
        &parse_function("void v(int n, int *a) { for (int i = 0; i < n; i += 4) { a[i] = 0; } }")
            .unwrap(),
    )
    .unwrap();
    let plan = compute_alignment(&sl, &vl).unwrap();
    let unrolled = unroll_scalar_c(&src, &plan).unwrap();

    let mut labels: Vec<String> = Vec::new();
    let mut gotos: Vec<String> = Vec::new();
    visit_stmts(&unrolled.body, &mut |s| match s {
        Stmt::Label(l) => labels.push(l.clone()),
        Stmt::Goto(l) => gotos.push(l.clone()),
        _ => {}
    });
    let unique: std::collections::BTreeSet<&String> = labels.iter().collect();
    assert_eq!(unique.len(), labels.len(), "duplicate labels after unroll");
    for g in &gotos {
        assert!(labels.contains(g), "goto {g} has no target");
    }
    // the parser's own validation is the final arbiter
    parse_function(&print_function(&unrolled)).unwrap();
}

#[test]
fn unrolled_code_compiles_at_warning_as_error_level() {
    let tc = Toolchain::discover().unwrap();
    for kernel in ["s251.c", "s278.c", "s482.c", "s121.c"] {
        let src = corpus(kernel);
        let sl = sole_canonical_loop(&src).unwrap();
        let vl = sole_canonical_loop(
            &parse_function(
                "void v(int n, int *a) { for (int i = 0; i < n; i += 8) { a[i] = 0; } }",
            )
            .unwrap(),
        )
        .unwrap();
        let plan = compute_alignment(&sl, &vl).unwrap();
        let unrolled = unroll_scalar_c(&src, &plan).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.c");
        std::fs::write(&path, print_function(&unrolled)).unwrap();
        let (flags, _) = split_flags("-O2 -mavx2 -Wall -Werror -Wshadow");
        let mut cmd = std::process::Command::new(&tc.cc);
        cmd.args(&flags)
            .arg("-c")
            .arg(&path)
            .args(["-o", "/dev/null"]);
        let out = run_command(cmd, Some(std::time::Duration::from_secs(60)), None).unwrap();
        assert!(
            out.success(),
            "{kernel} unrolled fails -Wall -Werror:\n{}",
            out.stderr
        );
    }
}

#[test]
fn externalization_is_symmetric() {
    let src = corpus("s212.c");
    let vec = corpus("vectorized/s212.c");
    let sl = sole_canonical_loop(&src).unwrap();
    let vl = first_canonical_loop(&vec).unwrap();
    let plan = compute_alignment(&sl, &vl).unwrap();
    let pair = externalize_arrays(TransformedPair::new(src, vec, plan)).unwrap();
    assert_eq!(pair.src.externs, pair.vec.externs);
    assert_eq!(pair.src.externs, vec!["a", "b", "c", "d"]);
    assert!(pair
        .src
        .params
        .iter()
        .all(|p| p.kind == ParamKind::ScalarInt));
    assert!(pair
        .vec
        .params
        .iter()
        .all(|p| p.kind == ParamKind::ScalarInt));
}

#[test]
fn split_queries_cover_every_lane_once() {
    let src = corpus("vadd1.c");
    let vec = corpus("vectorized/vadd1.c");
    let sl = sole_canonical_loop(&src).unwrap();
    let vl = sole_canonical_loop(&vec).unwrap();
    let plan = compute_alignment(&sl, &vl).unwrap();
    let report = check_splitting_eligibility(&src, &vec);
    let queries = spatial_split(&TransformedPair::new(src, vec, plan.clone()), &report).unwrap();
    let lanes: Vec<u32> = queries.iter().map(|q| q.index_j).collect();
    assert_eq!(lanes, (0..plan.m).collect::<Vec<_>>());
    for q in &queries {
        let printed = print_function(&q.src_slice);
        assert_eq!(
            printed.matches("a[k] =").count(),
            1,
            "slice writes more than one output index:\n{printed}"
        );
    }
}
