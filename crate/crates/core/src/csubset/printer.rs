//! Deterministic pretty-printer: 4-space indent, one statement per line,
//! minimal parentheses by operator precedence. The emitted text is a
//! standalone translation unit; goldens can assert it byte-for-byte.

use super::ast::*;
use std::fmt::Write;

pub fn print_function(f: &SourceFunction) -> String {
    let mut out = String::new();
    for inc in &f.includes {
        let _ = writeln!(out, "#include <{inc}>");
    }
    if !f.includes.is_empty() {
        out.push('\n');
    }
    for ext in &f.externs {
        let _ = writeln!(out, "extern int {ext}[];");
    }
    if !f.externs.is_empty() {
        out.push('\n');
    }
    let ret = type_name(&f.return_type);
    let params = f
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::ScalarInt => format!("int {}", p.name),
            ParamKind::IntArray => format!("int *{}", p.name),
        })
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "{ret} {}({params}) {{", f.name);
    print_body(&mut out, &f.body, 1);
    out.push_str("}\n");
    out
}

fn type_name(ty: &CType) -> String {
    match ty {
        CType::Void => "void".to_string(),
        CType::Int => "int".to_string(),
        CType::M256i => "__m256i".to_string(),
        CType::Ptr(inner) => format!("{} *", type_name(inner)),
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn print_body(out: &mut String, body: &[Stmt], level: usize) {
    for stmt in body {
        print_stmt(out, stmt, level);
    }
}

fn print_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    indent(out, level);
    match stmt {
        Stmt::Decl { ty, vars } => {
            let decls = vars
                .iter()
                .map(|(name, init)| match init {
                    Some(e) => format!("{name} = {}", print_expr(e)),
                    None => name.clone(),
                })
                .collect::<Vec<_>>()
                .join(", ");
            let _ = writeln!(out, "{} {decls};", type_name(ty));
        }
        Stmt::Assign { target, op, value } => {
            let lhs = match target {
                LValue::Var(n) => n.clone(),
                LValue::Index(n, idx) => format!("{n}[{}]", print_expr(idx)),
            };
            match (op, value) {
                (AssignOp::Add, Expr::Int(1)) if matches!(target, LValue::Var(_)) => {
                    let _ = writeln!(out, "{lhs}++;");
                }
                (AssignOp::Sub, Expr::Int(1)) if matches!(target, LValue::Var(_)) => {
                    let _ = writeln!(out, "{lhs}--;");
                }
                _ => {
                    let sym = match op {
                        AssignOp::Set => "=",
                        AssignOp::Add => "+=",
                        AssignOp::Sub => "-=",
                        AssignOp::Mul => "*=",
                        AssignOp::Div => "/=",
                        AssignOp::Mod => "%=",
                    };
                    let _ = writeln!(out, "{lhs} {sym} {};", print_expr(value));
                }
            }
        }
        Stmt::For(fl) => {
            let init = match &fl.init {
                None => String::new(),
                Some(ForInit::Decl { ty, name, value }) => {
                    format!("{} {name} = {}", type_name(ty), print_expr(value))
                }
                Some(ForInit::Assign { name, value }) => {
                    format!("{name} = {}", print_expr(value))
                }
            };
            let cond = fl.cond.as_ref().map(print_expr).unwrap_or_default();
            let step = match &fl.step {
                None => String::new(),
                Some(s) => print_step(s),
            };
            let _ = writeln!(out, "for ({init}; {cond}; {step}) {{");
            print_body(out, &fl.body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::If {
            cond,
            then_body,
            else_body,
        } => {
            let _ = writeln!(out, "if ({}) {{", print_expr(cond));
            print_body(out, then_body, level + 1);
            indent(out, level);
            match else_body {
                None => out.push_str("}\n"),
                Some(eb) => {
                    out.push_str("} else {\n");
                    print_body(out, eb, level + 1);
                    indent(out, level);
                    out.push_str("}\n");
                }
            }
        }
        Stmt::Goto(l) => {
            let _ = writeln!(out, "goto {l};");
        }
        Stmt::Label(l) => {
            let _ = writeln!(out, "{l}:;");
        }
        Stmt::Break => out.push_str("break;\n"),
        Stmt::Return(None) => out.push_str("return;\n"),
        Stmt::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", print_expr(e));
        }
        Stmt::Expr(e) => {
            let _ = writeln!(out, "{};", print_expr(e));
        }
    }
}

pub fn print_step(s: &ForStep) -> String {
    match (&s.dir, &s.amount) {
        (StepDir::Inc, Expr::Int(1)) => format!("{}++", s.var),
        (StepDir::Dec, Expr::Int(1)) => format!("{}--", s.var),
        (StepDir::Inc, e) => format!("{} += {}", s.var, print_expr(e)),
        (StepDir::Dec, e) => format!("{} -= {}", s.var, print_expr(e)),
    }
}

fn bin_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Mul | BinOp::Div | BinOp::Mod => 10,
        BinOp::Add | BinOp::Sub => 9,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 8,
        BinOp::Eq | BinOp::Ne => 7,
        BinOp::And => 4,
        BinOp::Or => 3,
    }
}

fn bin_sym(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::Mod => "%",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::And => "&&",
        BinOp::Or => "||",
    }
}

pub fn print_expr(e: &Expr) -> String {
    print_prec(e, 0)
}

fn print_prec(e: &Expr, min_prec: u8) -> String {
    const UNARY_PREC: u8 = 12;
    match e {
        Expr::Int(v) => format!("{v}"),
        Expr::Var(n) => n.clone(),
        Expr::Index(base, idx) => format!("{base}[{}]", print_prec(idx, 0)),
        Expr::Call(name, args) => {
            let args = args
                .iter()
                .map(|a| print_prec(a, 0))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{name}({args})")
        }
        Expr::Unary(op, inner) => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
                UnOp::AddrOf => "&",
            };
            let inner_s = print_prec(inner, UNARY_PREC);
            // keep -(-x) and &(&x) from gluing into -- / && tokens
            let glues = (*op == UnOp::Neg && inner_s.starts_with('-'))
                || (*op == UnOp::AddrOf && inner_s.starts_with('&'));
            let s = if glues {
                format!("{sym}({inner_s})")
            } else {
                format!("{sym}{inner_s}")
            };
            if UNARY_PREC < min_prec {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Cast(ty, inner) => {
            let s = format!("({}) {}", type_name(ty), print_prec(inner, UNARY_PREC));
            if UNARY_PREC < min_prec {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Binary(op, l, r) => {
            let prec = bin_prec(*op);
            let s = format!(
                "{} {} {}",
                print_prec(l, prec),
                bin_sym(*op),
                print_prec(r, prec + 1)
            );
            if prec < min_prec {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
