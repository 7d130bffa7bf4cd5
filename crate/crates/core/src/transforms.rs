//! Verification-enabling source rewrites: C-level unrolling, divisibility
//! assumption injection, array externalization, outer-iterator elevation,
//! and spatial case splitting.

use crate::csubset::*;
use crate::loop_model::{
    loop_nest_depth, sole_canonical_loop, AlignmentPlan, CanonicalLoop, DependenceReport, Direction,
};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("unroll failure: {0}")]
    UnrollFailure(String),
    #[error("function is not nested (loop depth < 2)")]
    NotNested,
    #[error("pair is not eligible for spatial splitting: {0}")]
    NotEligible(String),
    #[error("signature mismatch between source and vectorized functions: {0}")]
    SignatureMismatch(String),
    #[error(transparent)]
    LoopModel(#[from] crate::loop_model::LoopModelError),
}

/// A source/vector pair threaded through the rewrite pipeline, with the
/// applied transforms recorded in order.
#[derive(Debug, Clone)]
pub struct TransformedPair {
    pub src: SourceFunction,
    pub vec: SourceFunction,
    pub plan: AlignmentPlan,
    pub provenance: Vec<String>,
}

impl TransformedPair {
    pub fn new(src: SourceFunction, vec: SourceFunction, plan: AlignmentPlan) -> Self {
        TransformedPair {
            src,
            vec,
            plan,
            provenance: Vec::new(),
        }
    }
}

/// One of the `m` per-index equivalence queries of spatial splitting.
#[derive(Debug, Clone)]
pub struct SplitQuery {
    pub index_j: u32,
    pub src_slice: SourceFunction,
    pub vec_slice: SourceFunction,
}

const ASSUME_BUILTIN: &str = "__builtin_assume";

/// Unroll the function's single loop `m` times at the C level: the iterator
/// initialization is hoisted, the loop keeps its condition, and the body
/// becomes `m` copies each followed by `i += step`. Rewrites applied per
/// copy: break becomes return, goto labels get a per-copy suffix, and
/// duplicate top-level declarations turn into plain assignments.
pub fn unroll_scalar_c(
    f: &SourceFunction,
    plan: &AlignmentPlan,
) -> Result<SourceFunction, TransformError> {
    let cl = sole_canonical_loop(f)?;
    let loop_pos = f
        .body
        .iter()
        .position(|s| matches!(s, Stmt::For(_)))
        .expect("sole_canonical_loop guarantees a loop");

    let has_break = body_contains_break(&cl.body);
    if has_break {
        if f.return_type != CType::Void {
            return Err(TransformError::UnrollFailure(
                "break cannot become return in a value-returning function".to_string(),
            ));
        }
        if loop_pos + 1 != f.body.len() {
            return Err(TransformError::UnrollFailure(
                "break cannot become return while statements follow the loop".to_string(),
            ));
        }
    }

    let labels = defined_labels(&cl.body);
    let step_op = match cl.direction {
        Direction::Inc => AssignOp::Add,
        Direction::Dec => AssignOp::Sub,
    };

    let mut new_body: Vec<Stmt> = f.body[..loop_pos].to_vec();
    if cl.iter_declared {
        new_body.push(Stmt::Decl {
            ty: CType::Int,
            vars: vec![(cl.iterator.clone(), Some(cl.start.clone()))],
        });
    } else {
        new_body.push(Stmt::assign(
            LValue::Var(cl.iterator.clone()),
            AssignOp::Set,
            cl.start.clone(),
        ));
    }

    let declared_in_first: BTreeSet<String> = cl
        .body
        .iter()
        .filter_map(|s| match s {
            Stmt::Decl { vars, .. } => Some(vars.iter().map(|(n, _)| n.clone())),
            _ => None,
        })
        .flatten()
        .collect();

    let mut unrolled = Vec::new();
    for copy in 0..plan.m {
        let mut body = cl.body.clone();
        rewrite_breaks(&mut body);
        rename_labels(&mut body, &labels, copy);
        if copy > 0 {
            body = dedup_declarations(body, &declared_in_first);
        }
        unrolled.extend(body);
        unrolled.push(Stmt::assign(
            LValue::Var(cl.iterator.clone()),
            step_op,
            cl.step.clone(),
        ));
    }

    let orig_cond = match &f.body[loop_pos] {
        Stmt::For(fl) => fl.cond.clone(),
        _ => unreachable!(),
    };
    new_body.push(Stmt::For(ForLoop {
        init: None,
        cond: orig_cond,
        step: None,
        body: unrolled,
    }));
    new_body.extend_from_slice(&f.body[loop_pos + 1..]);

    Ok(SourceFunction {
        body: new_body,
        ..f.clone()
    })
}

fn body_contains_break(body: &[Stmt]) -> bool {
    let mut found = false;
    // breaks inside a nested for bind to that loop; don't descend into fors
    fn scan(body: &[Stmt], found: &mut bool) {
        for s in body {
            match s {
                Stmt::Break => *found = true,
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    scan(then_body, found);
                    if let Some(eb) = else_body {
                        scan(eb, found);
                    }
                }
                _ => {}
            }
        }
    }
    scan(body, &mut found);
    found
}

fn rewrite_breaks(body: &mut [Stmt]) {
    for s in body.iter_mut() {
        match s {
            Stmt::Break => *s = Stmt::Return(None),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                rewrite_breaks(then_body);
                if let Some(eb) = else_body {
                    rewrite_breaks(eb);
                }
            }
            _ => {}
        }
    }
}

fn defined_labels(body: &[Stmt]) -> BTreeSet<String> {
    let mut labels = BTreeSet::new();
    visit_stmts(body, &mut |s| {
        if let Stmt::Label(l) = s {
            labels.insert(l.clone());
        }
    });
    labels
}

fn rename_labels(body: &mut [Stmt], labels: &BTreeSet<String>, copy: u32) {
    for s in body.iter_mut() {
        match s {
            Stmt::Label(l) if labels.contains(l) => *l = format!("{l}_{copy}"),
            Stmt::Goto(l) if labels.contains(l) => *l = format!("{l}_{copy}"),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                rename_labels(then_body, labels, copy);
                if let Some(eb) = else_body {
                    rename_labels(eb, labels, copy);
                }
            }
            Stmt::For(fl) => rename_labels(&mut fl.body, labels, copy),
            _ => {}
        }
    }
}

/// Top-level declarations repeated by unrolling become assignments (keeping
/// the initializer's effect) or disappear (no initializer). Declarations
/// inside nested blocks are scoped and stay as they are.
fn dedup_declarations(body: Vec<Stmt>, declared: &BTreeSet<String>) -> Vec<Stmt> {
    let mut out = Vec::new();
    for stmt in body {
        match stmt {
            Stmt::Decl { ty, vars } => {
                let mut kept = Vec::new();
                for (name, init) in vars {
                    if declared.contains(&name) {
                        if let Some(e) = init {
                            out.push(Stmt::assign(LValue::Var(name), AssignOp::Set, e));
                        }
                    } else {
                        kept.push((name, init));
                    }
                }
                if !kept.is_empty() {
                    out.push(Stmt::Decl { ty, vars: kept });
                }
            }
            other => out.push(other),
        }
    }
    out
}

/// Prepend an assumption marker over `(end - start) % m == 0` at function
/// entry. Printed as a `__builtin_assume(...)` call, which the IR pipeline
/// lowers to an `llvm.assume`; it has no effect on concrete execution.
pub fn inject_divisibility_assumption(f: &SourceFunction, plan: &AlignmentPlan) -> SourceFunction {
    let mut body = Vec::with_capacity(f.body.len() + 1);
    body.push(Stmt::Expr(Expr::Call(
        ASSUME_BUILTIN.to_string(),
        vec![plan.assumption.clone()],
    )));
    body.extend(f.body.iter().cloned());
    SourceFunction { body, ..f.clone() }
}

/// Rename the vectorized function's parameters (and its name) to match the
/// source positionally. The validator matches globals by name across the two
/// modules, so externalized arrays must carry identical names.
pub fn rename_params_to_match(
    src: &SourceFunction,
    vec: &SourceFunction,
) -> Result<SourceFunction, TransformError> {
    if src.params.len() != vec.params.len() {
        return Err(TransformError::SignatureMismatch(format!(
            "{} vs {} parameters",
            src.params.len(),
            vec.params.len()
        )));
    }
    for (s, v) in src.params.iter().zip(vec.params.iter()) {
        if s.kind != v.kind {
            return Err(TransformError::SignatureMismatch(format!(
                "parameter `{}` vs `{}` differ in kind",
                s.name, v.name
            )));
        }
    }
    let mut renamed = vec.clone();
    renamed.name = src.name.clone();
    let mapping: Vec<(String, String)> = vec
        .params
        .iter()
        .zip(src.params.iter())
        .filter(|(v, s)| v.name != s.name)
        .map(|(v, s)| (v.name.clone(), s.name.clone()))
        .collect();
    if mapping.is_empty() {
        return Ok(renamed);
    }
    for (i, p) in renamed.params.iter_mut().enumerate() {
        p.name = src.params[i].name.clone();
    }
    let lookup = |n: &str| -> Option<String> {
        mapping
            .iter()
            .find(|(from, _)| from == n)
            .map(|(_, to)| to.clone())
    };
    rename_idents_in_body(&mut renamed.body, &lookup);
    Ok(renamed)
}

fn rename_idents_in_body(body: &mut [Stmt], lookup: &dyn Fn(&str) -> Option<String>) {
    fn fix_expr(e: &mut Expr, lookup: &dyn Fn(&str) -> Option<String>) {
        match e {
            Expr::Var(n) => {
                if let Some(to) = lookup(n) {
                    *n = to;
                }
            }
            Expr::Index(base, idx) => {
                if let Some(to) = lookup(base) {
                    *base = to;
                }
                fix_expr(idx, lookup);
            }
            Expr::Unary(_, inner) | Expr::Cast(_, inner) => fix_expr(inner, lookup),
            Expr::Binary(_, l, r) => {
                fix_expr(l, lookup);
                fix_expr(r, lookup);
            }
            Expr::Call(_, args) => {
                for a in args {
                    fix_expr(a, lookup);
                }
            }
            Expr::Int(_) => {}
        }
    }
    for stmt in body.iter_mut() {
        match stmt {
            Stmt::Decl { vars, .. } => {
                for (_, init) in vars {
                    if let Some(e) = init {
                        fix_expr(e, lookup);
                    }
                }
            }
            Stmt::Assign { target, value, .. } => {
                match target {
                    LValue::Var(n) => {
                        if let Some(to) = lookup(n) {
                            *n = to;
                        }
                    }
                    LValue::Index(n, idx) => {
                        if let Some(to) = lookup(n) {
                            *n = to;
                        }
                        fix_expr(idx, lookup);
                    }
                }
                fix_expr(value, lookup);
            }
            Stmt::For(fl) => {
                if let Some(init) = &mut fl.init {
                    match init {
                        ForInit::Decl { name, value, .. } | ForInit::Assign { name, value } => {
                            if let Some(to) = lookup(name) {
                                *name = to;
                            }
                            fix_expr(value, lookup);
                        }
                    }
                }
                if let Some(c) = &mut fl.cond {
                    fix_expr(c, lookup);
                }
                if let Some(s) = &mut fl.step {
                    if let Some(to) = lookup(&s.var) {
                        s.var = to;
                    }
                    fix_expr(&mut s.amount, lookup);
                }
                rename_idents_in_body(&mut fl.body, lookup);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                fix_expr(cond, lookup);
                rename_idents_in_body(then_body, lookup);
                if let Some(eb) = else_body {
                    rename_idents_in_body(eb, lookup);
                }
            }
            Stmt::Return(Some(e)) | Stmt::Expr(e) => fix_expr(e, lookup),
            Stmt::Goto(_) | Stmt::Label(_) | Stmt::Break | Stmt::Return(None) => {}
        }
    }
}

/// Move every `int *` parameter to a file-scope `extern int x[];` in both
/// functions, identically and in parameter order. The validator then models
/// the arrays as distinct memory regions, which is the non-aliasing
/// precondition vectorization needs.
pub fn externalize_arrays(pair: TransformedPair) -> Result<TransformedPair, TransformError> {
    let vec = rename_params_to_match(&pair.src, &pair.vec)?;
    let arrays: Vec<String> = pair
        .src
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::IntArray)
        .map(|p| p.name.clone())
        .collect();
    let externalize = |f: &SourceFunction| -> SourceFunction {
        let mut out = f.clone();
        out.params.retain(|p| p.kind == ParamKind::ScalarInt);
        for a in &arrays {
            if !out.externs.contains(a) {
                out.externs.push(a.clone());
            }
        }
        out
    };
    let mut provenance = pair.provenance;
    provenance.push("externalize_arrays".to_string());
    Ok(TransformedPair {
        src: externalize(&pair.src),
        vec: externalize(&vec),
        plan: pair.plan,
        provenance,
    })
}

/// Remove the outer loop of a nest and promote its iterator to a scalar
/// parameter, leaving the inner loop to be verified for an arbitrary outer
/// iteration. Applies one level per call.
pub fn elevate_outer_iterator(f: &SourceFunction) -> Result<SourceFunction, TransformError> {
    if loop_nest_depth(f) < 2 {
        return Err(TransformError::NotNested);
    }
    let pos = f
        .body
        .iter()
        .position(
            |s| matches!(s, Stmt::For(fl) if fl.body.iter().any(|b| matches!(b, Stmt::For(_)))),
        )
        .ok_or(TransformError::NotNested)?;
    let Stmt::For(outer) = &f.body[pos] else {
        unreachable!()
    };
    let iter_name = match &outer.init {
        Some(init) => init.name().to_string(),
        None => {
            return Err(TransformError::UnrollFailure(
                "outer loop has no iterator initialization".to_string(),
            ))
        }
    };
    let mut body: Vec<Stmt> = Vec::new();
    body.extend_from_slice(&f.body[..pos]);
    body.extend(outer.body.iter().cloned());
    body.extend_from_slice(&f.body[pos + 1..]);
    // drop any now-shadowing local declaration of the iterator
    body = body
        .into_iter()
        .filter_map(|s| match s {
            Stmt::Decl { ty, vars } => {
                let vars: Vec<_> = vars.into_iter().filter(|(n, _)| *n != iter_name).collect();
                if vars.is_empty() {
                    None
                } else {
                    Some(Stmt::Decl { ty, vars })
                }
            }
            other => Some(other),
        })
        .collect();
    let mut params = f.params.clone();
    params.push(Parameter {
        name: iter_name,
        kind: ParamKind::ScalarInt,
    });
    Ok(SourceFunction {
        params,
        body,
        ..f.clone()
    })
}

/// Spatial case splitting: one loop-free query per `j in [0, m)`. Each side
/// copies the checked index of every output array into an extern proxy, runs
/// its retained iteration against the proxies, and writes back only that
/// index. Input-only arrays stay as externs, whose unconstrained content is
/// exactly the index-abstraction the splitting argument needs.
pub fn spatial_split(
    pair: &TransformedPair,
    report: &DependenceReport,
) -> Result<Vec<SplitQuery>, TransformError> {
    if !report.eligible_for_splitting {
        return Err(TransformError::NotEligible(report.reasons.join("; ")));
    }
    let pair = if pair
        .src
        .params
        .iter()
        .any(|p| p.kind == ParamKind::IntArray)
    {
        externalize_arrays(pair.clone())?
    } else {
        pair.clone()
    };
    let src_loop = sole_canonical_loop(&pair.src)?;
    let vec_loop = sole_canonical_loop(&pair.vec)?;
    let step1 = src_loop.literal_step().ok_or_else(|| {
        TransformError::NotEligible("source step is not a constant literal".to_string())
    })? as i64;

    let taken: BTreeSet<String> = all_names(&pair.src)
        .union(&all_names(&pair.vec))
        .cloned()
        .collect();
    let proxy_name = |array: &str| -> String {
        let mut cand = format!("{array}1");
        while taken.contains(&cand) {
            cand.push('_');
        }
        cand
    };
    let outputs: Vec<(String, String)> = report
        .output_arrays
        .iter()
        .map(|a| (a.clone(), proxy_name(a)))
        .collect();

    let mut queries = Vec::with_capacity(pair.plan.m as usize);
    for j in 0..pair.plan.m {
        let lane_offset = i64::from(j) * step1;
        let lane_index = |start: &Expr| -> Expr {
            if lane_offset == 0 {
                start.clone()
            } else {
                Expr::binary(BinOp::Add, start.clone(), Expr::Int(lane_offset))
            }
        };

        let src_slice = build_slice(
            &pair.src,
            &src_loop,
            lane_index(&src_loop.start),
            lane_index(&src_loop.start),
            &outputs,
        );
        let vec_slice = build_slice(
            &pair.vec,
            &vec_loop,
            vec_loop.start.clone(),
            lane_index(&vec_loop.start),
            &outputs,
        );
        queries.push(SplitQuery {
            index_j: j,
            src_slice,
            vec_slice,
        });
    }
    Ok(queries)
}

fn all_names(f: &SourceFunction) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
    names.extend(f.externs.iter().cloned());
    visit_stmts(&f.body, &mut |s| match s {
        Stmt::Decl { vars, .. } => {
            for (n, _) in vars {
                names.insert(n.clone());
            }
        }
        Stmt::For(fl) => {
            if let Some(init) = &fl.init {
                names.insert(init.name().to_string());
            }
        }
        _ => {}
    });
    names
}

/// One retained iteration: `int i = iter_value;`, a lane index variable,
/// proxy copy-ins, the loop body with outputs renamed to proxies, and the
/// single-index write-back.
fn build_slice(
    f: &SourceFunction,
    cl: &CanonicalLoop,
    iter_value: Expr,
    lane_value: Expr,
    outputs: &[(String, String)],
) -> SourceFunction {
    let loop_pos = f
        .body
        .iter()
        .position(|s| matches!(s, Stmt::For(_)))
        .expect("slice builder requires the single-loop shape");

    let lane_var = {
        let mut cand = "k".to_string();
        let names = all_names(f);
        while names.contains(&cand) || cand == cl.iterator {
            cand.push('_');
        }
        cand
    };

    let mut body: Vec<Stmt> = f.body[..loop_pos].to_vec();
    let iter_predeclared = body.iter().any(
        |s| matches!(s, Stmt::Decl { vars, .. } if vars.iter().any(|(n, _)| *n == cl.iterator)),
    );
    if iter_predeclared {
        body.push(Stmt::assign(
            LValue::Var(cl.iterator.clone()),
            AssignOp::Set,
            iter_value,
        ));
    } else {
        body.push(Stmt::Decl {
            ty: CType::Int,
            vars: vec![(cl.iterator.clone(), Some(iter_value))],
        });
    }
    body.push(Stmt::Decl {
        ty: CType::Int,
        vars: vec![(lane_var.clone(), Some(lane_value))],
    });
    for (array, proxy) in outputs {
        body.push(Stmt::assign(
            LValue::Index(proxy.clone(), Expr::var(&lane_var)),
            AssignOp::Set,
            Expr::index(array, Expr::var(&lane_var)),
        ));
    }
    let mut slice_body = cl.body.clone();
    let lookup = |n: &str| -> Option<String> {
        outputs.iter().find(|(a, _)| a == n).map(|(_, p)| p.clone())
    };
    rename_idents_in_body(&mut slice_body, &lookup);
    body.extend(slice_body);
    for (array, proxy) in outputs {
        body.push(Stmt::assign(
            LValue::Index(array.clone(), Expr::var(&lane_var)),
            AssignOp::Set,
            Expr::index(proxy, Expr::var(&lane_var)),
        ));
    }

    let mut externs = f.externs.clone();
    for (_, proxy) in outputs {
        if !externs.contains(proxy) {
            externs.push(proxy.clone());
        }
    }
    SourceFunction {
        externs,
        body,
        ..f.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csubset::{parse_function, print_function};
    use crate::loop_model::{check_splitting_eligibility, compute_alignment, first_canonical_loop};

    const S212: &str = "void s212(int n, int *a, int *b, int *c, int *d) { for (int i = 0; i < n-1; i++) { a[i] *= c[i]; b[i] += a[i + 1] * d[i]; } }";

    fn plan_for(src: &SourceFunction, vec_step: u32) -> AlignmentPlan {
        let sl = sole_canonical_loop(src).unwrap();
        let vec_text = format!(
            "void v(int n, int *a) {{ for (int i = 0; i < n; i += {vec_step}) {{ a[i] = 0; }} }}"
        );
        let vl = first_canonical_loop(&parse_function(&vec_text).unwrap()).unwrap();
        compute_alignment(&sl, &vl).unwrap()
    }

    #[test]
    fn unroll_s212_by_eight() {
        let f = parse_function(S212).unwrap();
        let plan = plan_for(&f, 8);
        assert_eq!(plan.m, 8);
        let unrolled = unroll_scalar_c(&f, &plan).unwrap();
        // hoisted init + one loop
        assert_eq!(unrolled.body.len(), 2);
        let Stmt::For(fl) = &unrolled.body[1] else {
            panic!("expected loop");
        };
        assert!(fl.init.is_none() && fl.step.is_none());
        // 8 copies of (2 assignments) interleaved with 8 iterator bumps
        assert_eq!(fl.body.len(), 24);
        let bumps = fl
            .body
            .iter()
            .filter(|s| matches!(s, Stmt::Assign { target: LValue::Var(v), .. } if v == "i"))
            .count();
        assert_eq!(bumps, 8);
        // still parses and prints stably
        let printed = print_function(&unrolled);
        let reparsed = parse_function(&printed).unwrap();
        assert!(ast_equal(&unrolled, &reparsed));
    }

    #[test]
    fn unroll_unit_factor_only_hoists_init() {
        let f = parse_function(S212).unwrap();
        let plan = plan_for(&f, 1);
        assert_eq!(plan.m, 1);
        let unrolled = unroll_scalar_c(&f, &plan).unwrap();
        let Stmt::For(fl) = &unrolled.body[1] else {
            panic!()
        };
        assert_eq!(fl.body.len(), 3); // two assignments + i++
    }

    #[test]
    fn unroll_uniquifies_goto_labels() {
        let src = "void s278(int n, int *a, int *b, int *c, int *d, int *e) { for (int i = 0; i < n; i++) { if (a[i] > 0) { goto L20; } b[i] = -b[i] + d[i] * e[i]; goto L30; L20:; c[i] = -c[i] + d[i] * e[i]; L30:; a[i] = b[i] + c[i] * d[i]; } }";
        let f = parse_function(src).unwrap();
        let plan = plan_for(&f, 2);
        let unrolled = unroll_scalar_c(&f, &plan).unwrap();
        let printed = print_function(&unrolled);
        for label in ["L20_0:;", "L30_0:;", "L20_1:;", "L30_1:;"] {
            assert!(printed.contains(label), "missing {label} in:\n{printed}");
        }
        // every goto target resolves: reparse validates it
        parse_function(&printed).unwrap();
    }

    #[test]
    fn unroll_replaces_break_with_return() {
        let src = "void s482(int n, int *a, int *b, int *c) { for (int i = 0; i < n; i++) { a[i] += b[i] * c[i]; if (c[i] > b[i]) { break; } } }";
        let f = parse_function(src).unwrap();
        let plan = plan_for(&f, 4);
        let unrolled = unroll_scalar_c(&f, &plan).unwrap();
        let printed = print_function(&unrolled);
        assert!(!printed.contains("break"));
        assert!(printed.contains("return;"));
    }

    #[test]
    fn unroll_refuses_break_in_value_returning_function() {
        let src = "int f(int n, int *a) { int r = 0; for (int i = 0; i < n; i++) { if (a[i] < 0) { break; } r = i; } return r; }";
        let f = parse_function(src).unwrap();
        let plan = plan_for(&f, 2);
        assert!(matches!(
            unroll_scalar_c(&f, &plan),
            Err(TransformError::UnrollFailure(_))
        ));
    }

    #[test]
    fn unroll_dedups_declarations() {
        let src = "void f(int n, int *a, int *b) { for (int i = 0; i < n; i++) { int t = b[i]; a[i] = t * 2; } }";
        let f = parse_function(src).unwrap();
        let plan = plan_for(&f, 4);
        let unrolled = unroll_scalar_c(&f, &plan).unwrap();
        let printed = print_function(&unrolled);
        assert_eq!(printed.matches("int t =").count(), 1);
        assert_eq!(printed.matches("t = b[i];").count(), 4);
        parse_function(&printed).unwrap();
    }

    #[test]
    fn assumption_marker_prepends_builtin_call() {
        let f = parse_function(S212).unwrap();
        let plan = plan_for(&f, 8);
        let with_assume = inject_divisibility_assumption(&f, &plan);
        let printed = print_function(&with_assume);
        assert!(printed.contains("__builtin_assume((n - 1 - 0) % 8 == 0);"));
        // trivially true for m == 1, still emitted
        let plan1 = plan_for(&f, 1);
        let printed1 = print_function(&inject_divisibility_assumption(&f, &plan1));
        assert!(printed1.contains("__builtin_assume((n - 1 - 0) % 1 == 0);"));
    }

    #[test]
    fn assumption_uses_loop_start() {
        let src = "void f(int n, int *a) { for (int i = 4; i < n; i += 4) { a[i] = 0; } }";
        let f = parse_function(src).unwrap();
        let sl = sole_canonical_loop(&f).unwrap();
        let vl = sole_canonical_loop(
            &parse_function(
                "void v(int n, int *a) { for (int i = 4; i < n; i += 16) { a[i] = 0; } }",
            )
            .unwrap(),
        )
        .unwrap();
        let plan = compute_alignment(&sl, &vl).unwrap();
        assert_eq!(plan.m, 4);
        let printed = print_function(&inject_divisibility_assumption(&f, &plan));
        assert!(printed.contains("__builtin_assume((n - 4) % 4 == 0);"));
    }

    #[test]
    fn externalize_moves_arrays_to_externs() {
        let f = parse_function("void f(int n, int *a, int *b) { a[0] = b[0]; }").unwrap();
        let plan = AlignmentPlan {
            v: 8,
            m: 8,
            assumption: Expr::Int(1),
            vector_unroll: 1,
        };
        let pair = TransformedPair::new(f.clone(), f.clone(), plan);
        let out = externalize_arrays(pair).unwrap();
        for side in [&out.src, &out.vec] {
            assert_eq!(side.externs, vec!["a".to_string(), "b".to_string()]);
            assert_eq!(side.params.len(), 1);
            assert_eq!(side.params[0].name, "n");
        }
        let printed = print_function(&out.src);
        assert!(printed.contains("extern int a[];"));
        assert!(printed.starts_with("extern int a[];\nextern int b[];\n\nvoid f(int n) {"));
        assert_eq!(out.provenance, vec!["externalize_arrays".to_string()]);
    }

    #[test]
    fn externalize_no_arrays_is_identity() {
        let f = parse_function("void f(int n) { int x = n; }").unwrap();
        let plan = AlignmentPlan {
            v: 1,
            m: 1,
            assumption: Expr::Int(1),
            vector_unroll: 1,
        };
        let out = externalize_arrays(TransformedPair::new(f.clone(), f.clone(), plan)).unwrap();
        assert!(ast_equal(&out.src, &f));
    }

    #[test]
    fn externalize_renames_mismatched_candidate_params() {
        let src = parse_function("void f(int n, int *a, int *b) { a[0] = b[0]; }").unwrap();
        let vec =
            parse_function("void f(int len, int *dst, int *srcp) { dst[0] = srcp[0]; }").unwrap();
        let plan = AlignmentPlan {
            v: 8,
            m: 8,
            assumption: Expr::Int(1),
            vector_unroll: 1,
        };
        let out = externalize_arrays(TransformedPair::new(src, vec, plan)).unwrap();
        let printed = print_function(&out.vec);
        assert!(printed.contains("a[0] = b[0];"), "{printed}");
        assert!(printed.contains("void f(int n)"));
    }

    #[test]
    fn elevate_removes_one_nest_level() {
        let src = "void f(int n, int *a) { for (int j = 0; j < n; j++) { for (int i = 0; i < n; i++) { a[i] = a[i] + j; } } }";
        let f = parse_function(src).unwrap();
        let once = elevate_outer_iterator(&f).unwrap();
        assert_eq!(once.params.last().unwrap().name, "j");
        assert_eq!(loop_nest_depth(&once), 1);
        let printed = print_function(&once);
        parse_function(&printed).unwrap();

        let flat = parse_function(S212).unwrap();
        assert!(matches!(
            elevate_outer_iterator(&flat),
            Err(TransformError::NotNested)
        ));
    }

    #[test]
    fn elevate_triple_nest_peels_exactly_one() {
        let src = "void f(int n, int *a) { for (int k = 0; k < n; k++) { for (int j = 0; j < n; j++) { for (int i = 0; i < n; i++) { a[i] = a[i] + j + k; } } } }";
        let f = parse_function(src).unwrap();
        assert_eq!(loop_nest_depth(&f), 3);
        let once = elevate_outer_iterator(&f).unwrap();
        assert_eq!(loop_nest_depth(&once), 2);
        assert_eq!(once.params.last().unwrap().name, "k");
    }

    #[test]
    fn elevate_handles_predeclared_iterator() {
        let src = "void f(int n, int *a) { int j; for (j = 0; j < n; j++) { for (int i = 0; i < n; i++) { a[i] = j; } } }";
        let f = parse_function(src).unwrap();
        let once = elevate_outer_iterator(&f).unwrap();
        let printed = print_function(&once);
        // no shadowing local declaration of j remains
        assert!(!printed.contains("int j;"), "{printed}");
        parse_function(&printed).unwrap();
    }

    const VADD1: &str =
        "void vadd1(int n, int *a, int *b) { for (int i = 0; i < n; i++) { a[i] = b[i] + 1; } }";
    const VADD1_VEC: &str = "#include <immintrin.h>\nvoid vadd1(int n, int *a, int *b) { for (int i = 0; i < n; i += 8) { __m256i b_vec = _mm256_loadu_si256((__m256i *)(b + i)); __m256i one_vec = _mm256_set1_epi32(1); __m256i result_vec = _mm256_add_epi32(b_vec, one_vec); _mm256_storeu_si256((__m256i *)(a + i), result_vec); } }";

    #[test]
    fn spatial_split_produces_m_single_index_queries() {
        let src = parse_function(VADD1).unwrap();
        let vec = parse_function(VADD1_VEC).unwrap();
        let sl = sole_canonical_loop(&src).unwrap();
        let vl = sole_canonical_loop(&vec).unwrap();
        let plan = compute_alignment(&sl, &vl).unwrap();
        let report = check_splitting_eligibility(&src, &vec);
        assert!(report.eligible_for_splitting, "{:?}", report.reasons);
        let pair = TransformedPair::new(src, vec, plan);
        let queries = spatial_split(&pair, &report).unwrap();
        assert_eq!(queries.len(), 8);
        for (j, q) in queries.iter().enumerate() {
            assert_eq!(q.index_j as usize, j);
            // loop-free slices
            assert_eq!(crate::loop_model::for_loop_count(&q.src_slice), 0);
            assert_eq!(crate::loop_model::for_loop_count(&q.vec_slice), 0);
            let s = print_function(&q.src_slice);
            let v = print_function(&q.vec_slice);
            // each side writes the output array at exactly one index
            assert_eq!(s.matches("a[k] =").count(), 1, "{s}");
            assert_eq!(v.matches("a[k] =").count(), 1, "{v}");
            parse_function(&s).unwrap();
            parse_function(&v).unwrap();
        }
        // lane indices cover 0..8
        let q3 = print_function(&queries[3].src_slice);
        assert!(q3.contains("int k = 0 + 3;"), "{q3}");
    }

    #[test]
    fn spatial_split_refuses_ineligible_pairs() {
        let src = parse_function(
            "void s453(int *a, int *b, int n) { int s = 0; for (int i = 0; i < n; i++) { s += 2; a[i] = s * b[i]; } }",
        )
        .unwrap();
        let vec = parse_function(VADD1_VEC).unwrap();
        let report = check_splitting_eligibility(&src, &vec);
        assert!(!report.eligible_for_splitting);
        let plan = AlignmentPlan {
            v: 8,
            m: 8,
            assumption: Expr::Int(1),
            vector_unroll: 1,
        };
        let pair = TransformedPair::new(src, vec, plan);
        assert!(matches!(
            spatial_split(&pair, &report),
            Err(TransformError::NotEligible(_))
        ));
    }
}
