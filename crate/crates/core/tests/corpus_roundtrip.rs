//! Corpus-wide parser/printer properties: parse -> print -> parse is a fixed
//! point, access reports are complete, and every emitted file compiles under
//! the shipped scalar flag profiles.

use std::path::PathBuf;
use std::process::Command;
use vecpipe::csubset::{
    ast_equal, collect_array_accesses, count_index_nodes, parse_function, print_function,
};
use vecpipe::tools::{find_in_path, run_command, split_flags};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_files(sub: &str) -> Vec<PathBuf> {
    let dir = if sub.is_empty() {
        corpus_dir()
    } else {
        corpus_dir().join(sub)
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("cannot read corpus at {}: {e}", dir.display()))
        .filter_map(|entry| {
            let path = entry.unwrap().path();
            (path.extension().is_some_and(|e| e == "c")).then_some(path)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_corpus_file_parses_and_round_trips() {
    let mut checked = 0;
    for path in corpus_files("")
        .into_iter()
        .chain(corpus_files("vectorized"))
    {
        let text = std::fs::read_to_string(&path).unwrap();
        let f1 = parse_function(&text)
            .unwrap_or_else(|e| panic!("{} failed to parse: {e}", path.display()));
        let printed = print_function(&f1);
        let f2 = parse_function(&printed)
            .unwrap_or_else(|e| panic!("{} reprint failed to parse: {e}", path.display()));
        assert!(
            ast_equal(&f1, &f2),
            "{} is not a round-trip fixed point",
            path.display()
        );
        assert_eq!(
            printed,
            print_function(&f2),
            "{} printing is not idempotent",
            path.display()
        );
        checked += 1;
    }
    assert!(checked >= 30, "corpus unexpectedly small: {checked} files");
}

#[test]
fn access_reports_cover_every_index_node() {
    for path in corpus_files("")
        .into_iter()
        .chain(corpus_files("vectorized"))
    {
        let text = std::fs::read_to_string(&path).unwrap();
        let f = parse_function(&text).unwrap();
        let report = collect_array_accesses(&f);
        assert_eq!(
            report.entries.len(),
            count_index_nodes(&f),
            "access report incomplete for {}",
            path.display()
        );
    }
}

fn compile_with(cc: &str, flags: &str, source: &str) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.c");
    std::fs::write(&path, source).unwrap();
    let (compile_flags, _) = split_flags(flags);
    let mut cmd = Command::new(cc);
    cmd.args(&compile_flags)
        .arg("-c")
        .arg(&path)
        .args(["-o", "/dev/null"]);
    let out = run_command(cmd, Some(std::time::Duration::from_secs(60)), None).unwrap();
    if out.success() {
        Ok(())
    } else {
        Err(out.stderr)
    }
}

#[test]
fn emitted_text_compiles_under_scalar_profiles() {
    let profiles: Vec<(String, String)> = vecpipe::bench::shipped_profiles()
        .into_iter()
        .filter(|p| find_in_path(&p.id).is_some())
        .map(|p| (p.id, p.scalar_flags))
        .collect();
    assert!(
        !profiles.is_empty(),
        "no shipped-profile compiler installed; cannot check emitted-code compilability"
    );
    for path in corpus_files("")
        .into_iter()
        .chain(corpus_files("vectorized"))
    {
        let text = std::fs::read_to_string(&path).unwrap();
        let printed = print_function(&parse_function(&text).unwrap());
        for (cc, flags) in &profiles {
            compile_with(cc, flags, &printed).unwrap_or_else(|e| {
                panic!(
                    "reprint of {} does not compile under {cc} {flags}:\n{e}\n--- emitted ---\n{printed}",
                    path.display()
                )
            });
        }
    }
}

#[test]
fn emitted_intrinsics_include_immintrin() {
    let text = std::fs::read_to_string(corpus_dir().join("vectorized/s212.c")).unwrap();
    let printed = print_function(&parse_function(&text).unwrap());
    assert!(printed.contains("#include <immintrin.h>"));
    if let Some(clang) = find_in_path("clang") {
        compile_with(clang.to_str().unwrap(), "-O3 -mavx2", &printed).unwrap();
    }
}

mod generated {
    use super::*;
    use proptest::prelude::*;
    use vecpipe::csubset::*;

    fn small_int() -> impl Strategy<Value = Expr> {
        (-100i64..100).prop_map(Expr::Int)
    }

    fn scalar_var() -> impl Strategy<Value = Expr> {
        prop_oneof![
            Just(Expr::var("n")),
            Just(Expr::var("t0")),
            Just(Expr::var("t1")),
        ]
    }

    fn expr(depth: u32) -> BoxedStrategy<Expr> {
        let leaf = prop_oneof![small_int(), scalar_var()];
        leaf.prop_recursive(depth, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), bin_op())
                    .prop_map(|(l, r, op)| { Expr::binary(op, l, r) }),
                inner.clone().prop_map(|e| Expr::index("a", e)),
                inner.clone().prop_map(|e| Expr::index("b", e)),
                // negation only over non-literals: parse folds -<literal>
                inner
                    .clone()
                    .prop_filter_map("fold-safe negation", |e| match e {
                        Expr::Int(_) => None,
                        other => Some(Expr::Unary(UnOp::Neg, Box::new(other))),
                    }),
                inner.prop_map(|e| Expr::Cast(CType::Int, Box::new(e))),
            ]
        })
        .boxed()
    }

    fn bin_op() -> impl Strategy<Value = BinOp> {
        prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Mod),
            Just(BinOp::Lt),
            Just(BinOp::Le),
            Just(BinOp::Gt),
            Just(BinOp::Ne),
            Just(BinOp::And),
            Just(BinOp::Or),
        ]
    }

    fn lvalue() -> impl Strategy<Value = (LValue, AssignOp)> {
        let target = prop_oneof![
            Just(LValue::Var("t0".to_string())),
            Just(LValue::Var("t1".to_string())),
            expr(2).prop_map(|e| LValue::Index("a".to_string(), e)),
        ];
        let op = prop_oneof![
            Just(AssignOp::Set),
            Just(AssignOp::Add),
            Just(AssignOp::Sub),
            Just(AssignOp::Mul),
        ];
        (target, op)
    }

    fn stmt(depth: u32) -> BoxedStrategy<Stmt> {
        let assign = (lvalue(), expr(3)).prop_map(|((target, op), value)| Stmt::Assign {
            target,
            op,
            value,
        });
        if depth == 0 {
            return assign.boxed();
        }
        let nested = prop::collection::vec(stmt(depth - 1), 0..3);
        prop_oneof![
            3 => assign,
            1 => (expr(2), nested.clone(), proptest::option::of(prop::collection::vec(stmt(depth - 1), 0..2)))
                .prop_map(|(cond, then_body, else_body)| Stmt::If { cond, then_body, else_body }),
            1 => (expr(2), 1i64..4, nested, 0u8..2).prop_map(move |(bound, step, body, style)| {
                let iter = format!("it{depth}");
                Stmt::For(ForLoop {
                    init: Some(ForInit::Decl { ty: CType::Int, name: iter.clone(), value: Expr::Int(0) }),
                    cond: Some(Expr::binary(BinOp::Lt, Expr::Var(iter.clone()), bound)),
                    step: Some(ForStep {
                        var: iter,
                        dir: if style == 0 { StepDir::Inc } else { StepDir::Dec },
                        amount: Expr::Int(step),
                    }),
                    body,
                })
            }),
        ]
        .boxed()
    }

    fn function() -> impl Strategy<Value = SourceFunction> {
        prop::collection::vec(stmt(2), 0..6).prop_map(|mut body| {
            let mut full = vec![Stmt::Decl {
                ty: CType::Int,
                vars: vec![
                    ("t0".to_string(), Some(Expr::Int(0))),
                    ("t1".to_string(), None),
                ],
            }];
            full.append(&mut body);
            SourceFunction {
                name: "gen".to_string(),
                return_type: CType::Void,
                params: vec![
                    Parameter {
                        name: "n".to_string(),
                        kind: ParamKind::ScalarInt,
                    },
                    Parameter {
                        name: "a".to_string(),
                        kind: ParamKind::IntArray,
                    },
                    Parameter {
                        name: "b".to_string(),
                        kind: ParamKind::IntArray,
                    },
                ],
                externs: Vec::new(),
                includes: Vec::new(),
                body: full,
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn print_parse_is_identity_on_generated_asts(f in function()) {
            let printed = print_function(&f);
            let reparsed = parse_function(&printed)
                .unwrap_or_else(|e| panic!("generated AST printed unparseable text: {e}\n{printed}"));
            prop_assert!(ast_equal(&f, &reparsed), "round trip changed:\n{printed}");
        }
    }
}
