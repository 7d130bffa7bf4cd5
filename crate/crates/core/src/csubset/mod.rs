//! Parse, analyze, and re-emit a restricted C subset sufficient for
//! TSVC-style integer kernels and their AVX2-vectorized counterparts.
//!
//! The subset (a deliberate minimal closure over the corpus): functions
//! returning `void` or `int`; parameters of `int` or `int *`; for/if-else/
//! goto/label/break/return/assignment statements; expressions over 32-bit
//! ints; `__m256i` as an opaque vector value type; no preprocessor beyond
//! `#include`. Intrinsics are recorded by name and arguments only — the
//! C compiler owns their semantics.

mod ast;
mod lexer;
mod parser;
mod printer;

pub use ast::*;
pub use parser::parse_function;
pub use printer::{print_expr, print_function, print_step};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: u32, col: u32, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
    /// Compound assignment or an address passed to an unrecognized call.
    ReadWrite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayAccess {
    pub array: String,
    pub index: Expr,
    pub kind: AccessKind,
}

/// Per-array read/write index report; one entry per array-index node.
#[derive(Debug, Clone, Default)]
pub struct AccessReport {
    pub entries: Vec<ArrayAccess>,
}

impl AccessReport {
    pub fn arrays(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.array.as_str()).collect()
    }

    pub fn reads(&self, array: &str) -> Vec<&Expr> {
        self.entries
            .iter()
            .filter(|e| {
                e.array == array && matches!(e.kind, AccessKind::Read | AccessKind::ReadWrite)
            })
            .map(|e| &e.index)
            .collect()
    }

    pub fn writes(&self, array: &str) -> Vec<&Expr> {
        self.entries
            .iter()
            .filter(|e| {
                e.array == array && matches!(e.kind, AccessKind::Write | AccessKind::ReadWrite)
            })
            .map(|e| &e.index)
            .collect()
    }

    pub fn read_arrays(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, AccessKind::Read | AccessKind::ReadWrite))
            .map(|e| e.array.clone())
            .collect()
    }

    pub fn written_arrays(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, AccessKind::Write | AccessKind::ReadWrite))
            .map(|e| e.array.clone())
            .collect()
    }
}

/// Collect every array-index expression in the function, classified read or
/// write. The left-hand side of a plain assignment is a write; a compound
/// assignment is both. Addresses passed to `_mm256_*store*` calls count as
/// writes, to `*load*` calls as reads, and to anything else as both.
pub fn collect_array_accesses(f: &SourceFunction) -> AccessReport {
    let mut report = AccessReport::default();
    collect_in_body(&f.body, &mut report);
    report
}

fn collect_in_body(body: &[Stmt], report: &mut AccessReport) {
    for stmt in body {
        match stmt {
            Stmt::Decl { vars, .. } => {
                for (_, init) in vars {
                    if let Some(e) = init {
                        collect_in_expr(e, AccessKind::Read, report);
                    }
                }
            }
            Stmt::Assign { target, op, value } => {
                if let LValue::Index(array, idx) = target {
                    let kind = if *op == AssignOp::Set {
                        AccessKind::Write
                    } else {
                        AccessKind::ReadWrite
                    };
                    report.entries.push(ArrayAccess {
                        array: array.clone(),
                        index: idx.clone(),
                        kind,
                    });
                    collect_in_expr(idx, AccessKind::Read, report);
                }
                collect_in_expr(value, AccessKind::Read, report);
            }
            Stmt::For(fl) => {
                if let Some(init) = &fl.init {
                    collect_in_expr(init.value(), AccessKind::Read, report);
                }
                if let Some(c) = &fl.cond {
                    collect_in_expr(c, AccessKind::Read, report);
                }
                if let Some(s) = &fl.step {
                    collect_in_expr(&s.amount, AccessKind::Read, report);
                }
                collect_in_body(&fl.body, report);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                collect_in_expr(cond, AccessKind::Read, report);
                collect_in_body(then_body, report);
                if let Some(eb) = else_body {
                    collect_in_body(eb, report);
                }
            }
            Stmt::Return(Some(e)) | Stmt::Expr(e) => collect_in_expr(e, AccessKind::Read, report),
            Stmt::Goto(_) | Stmt::Label(_) | Stmt::Break | Stmt::Return(None) => {}
        }
    }
}

fn collect_in_expr(e: &Expr, ctx: AccessKind, report: &mut AccessReport) {
    match e {
        Expr::Index(array, idx) => {
            report.entries.push(ArrayAccess {
                array: array.clone(),
                index: (**idx).clone(),
                kind: ctx,
            });
            collect_in_expr(idx, AccessKind::Read, report);
        }
        Expr::Unary(UnOp::AddrOf, inner) | Expr::Cast(_, inner) => {
            collect_in_expr(inner, ctx, report)
        }
        Expr::Unary(_, inner) => collect_in_expr(inner, AccessKind::Read, report),
        Expr::Binary(_, l, r) => {
            collect_in_expr(l, AccessKind::Read, report);
            collect_in_expr(r, AccessKind::Read, report);
        }
        Expr::Call(name, args) => {
            let addr_kind = if name.contains("store") {
                AccessKind::Write
            } else if name.contains("load") {
                AccessKind::Read
            } else {
                AccessKind::ReadWrite
            };
            for (i, arg) in args.iter().enumerate() {
                // only the pointer operand of a store is written through
                let k = if addr_kind == AccessKind::Write && i > 0 {
                    AccessKind::Read
                } else {
                    addr_kind
                };
                collect_in_expr(arg, k, report);
            }
        }
        Expr::Int(_) | Expr::Var(_) => {}
    }
}

/// Total count of array-index nodes in the AST (expression Index nodes plus
/// indexed assignment targets); equals the access report's entry count.
pub fn count_index_nodes(f: &SourceFunction) -> usize {
    let mut count = 0usize;
    visit_exprs(&f.body, &mut |e| {
        if matches!(e, Expr::Index(_, _)) {
            count += 1;
        }
    });
    visit_stmts(&f.body, &mut |s| {
        if let Stmt::Assign {
            target: LValue::Index(_, _),
            ..
        } = s
        {
            count += 1;
        }
    });
    count
}
