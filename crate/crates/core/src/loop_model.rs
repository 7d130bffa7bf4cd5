//! Canonical loop views, the source-unroll alignment plan, and the
//! conservative syntactic dependence screen that gates spatial splitting.

use crate::csubset::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpKind {
    Lt,
    Le,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Inc,
    Dec,
}

/// A for-loop in the canonical form `for (i = start; i < end; i += step)`.
/// `i <= end` and `i != end` variants record their comparison; decrementing
/// loops keep `direction: Dec` and read `cmp` as the mirrored comparison
/// (`i > end` is Lt, `i >= end` is Le).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalLoop {
    pub iterator: String,
    pub start: Expr,
    pub end: Expr,
    pub step: Expr,
    pub cmp: CmpKind,
    pub direction: Direction,
    pub body: Vec<Stmt>,
    /// Whether the iterator was declared in the for-init (`int i = 0`).
    pub iter_declared: bool,
}

impl CanonicalLoop {
    /// Step magnitude when the step is a literal.
    pub fn literal_step(&self) -> Option<u32> {
        match self.step {
            Expr::Int(v) if v > 0 => u32::try_from(v).ok(),
            _ => None,
        }
    }

    /// The trip-count span: how many iterator values the loop visits, as an
    /// expression. `for (i = 0; i < n - 1; i++)` has span `n - 1 - 0`, which
    /// is the quantity the divisibility assumption constrains.
    pub fn span_expr(&self) -> Expr {
        let end = match (self.cmp, self.direction) {
            (CmpKind::Lt | CmpKind::Ne, _) => self.end.clone(),
            (CmpKind::Le, Direction::Inc) => {
                Expr::binary(BinOp::Add, self.end.clone(), Expr::Int(1))
            }
            (CmpKind::Le, Direction::Dec) => {
                Expr::binary(BinOp::Sub, self.end.clone(), Expr::Int(1))
            }
        };
        match self.direction {
            Direction::Inc => Expr::binary(BinOp::Sub, end, self.start.clone()),
            Direction::Dec => Expr::binary(BinOp::Sub, self.start.clone(), end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("non-canonical loop: {reason}")]
pub struct NonCanonicalLoop {
    pub reason: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LoopModelError {
    #[error("function has no for-loop")]
    NoLoop,
    #[error("expected exactly one for-loop, found {0}")]
    MultipleLoops(usize),
    #[error(transparent)]
    NonCanonical(#[from] NonCanonicalLoop),
    #[error("unsupported step: {0}")]
    UnsupportedStep(String),
    #[error("source and vector loops step in different directions")]
    DirectionMismatch,
}

/// The loop alignment: `v = lcm(step1, step2)`, source unroll `m = v/step1`,
/// vector unroll pinned to 1, and the divisibility assumption
/// `(end1 - start1) % m == 0` that removes the epilogue from verification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPlan {
    pub v: u32,
    pub m: u32,
    pub assumption: Expr,
    pub vector_unroll: u32,
}

/// One entry per for-loop, outer-first; loops outside the canonical form are
/// flagged with the reason rather than silently normalized.
pub fn extract_canonical_loops(f: &SourceFunction) -> Vec<Result<CanonicalLoop, NonCanonicalLoop>> {
    let mut out = Vec::new();
    collect_loops(&f.body, &mut out);
    out
}

fn collect_loops(body: &[Stmt], out: &mut Vec<Result<CanonicalLoop, NonCanonicalLoop>>) {
    for (i, stmt) in body.iter().enumerate() {
        match stmt {
            Stmt::For(fl) => {
                out.push(canonicalize_with_context(
                    fl,
                    if i > 0 { Some(&body[i - 1]) } else { None },
                ));
                collect_loops(&fl.body, out);
            }
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_loops(then_body, out);
                if let Some(eb) = else_body {
                    collect_loops(eb, out);
                }
            }
            _ => {}
        }
    }
}

/// An init-less `for (; i < end; i += step)` immediately preceded by
/// `int i = start;` or `i = start;` reads as the canonical form with that
/// start; the common shape of generated candidates. The preceding statement
/// stays in the function body, so rebuilders must emit the iterator as an
/// assignment (iter_declared is false).
fn canonicalize_with_context(
    fl: &ForLoop,
    prev: Option<&Stmt>,
) -> Result<CanonicalLoop, NonCanonicalLoop> {
    if fl.init.is_some() {
        return canonicalize(fl);
    }
    let Some(step) = &fl.step else {
        return canonicalize(fl);
    };
    let start = match prev {
        Some(Stmt::Decl {
            ty: CType::Int,
            vars,
        }) if vars.len() == 1 => match &vars[0] {
            (name, Some(value)) if *name == step.var => Some(value.clone()),
            _ => None,
        },
        Some(Stmt::Assign {
            target: LValue::Var(name),
            op: AssignOp::Set,
            value,
        }) if *name == step.var => Some(value.clone()),
        _ => None,
    };
    match start {
        Some(value) => canonicalize(&ForLoop {
            init: Some(ForInit::Assign {
                name: step.var.clone(),
                value,
            }),
            ..fl.clone()
        }),
        None => canonicalize(fl),
    }
}

fn canonicalize(fl: &ForLoop) -> Result<CanonicalLoop, NonCanonicalLoop> {
    let fail = |reason: &str| {
        Err(NonCanonicalLoop {
            reason: reason.to_string(),
        })
    };
    let Some(init) = &fl.init else {
        return fail("no initialization of the iterator");
    };
    let (iterator, start, iter_declared) = match init {
        ForInit::Decl { name, value, .. } => (name.clone(), value.clone(), true),
        ForInit::Assign { name, value } => (name.clone(), value.clone(), false),
    };
    let Some(cond) = &fl.cond else {
        return fail("no loop condition");
    };
    let (cmp, cond_dir, end) = match cond {
        Expr::Binary(op, lhs, rhs) if **lhs == Expr::Var(iterator.clone()) => match op {
            BinOp::Lt => (CmpKind::Lt, Some(Direction::Inc), (**rhs).clone()),
            BinOp::Le => (CmpKind::Le, Some(Direction::Inc), (**rhs).clone()),
            BinOp::Gt => (CmpKind::Lt, Some(Direction::Dec), (**rhs).clone()),
            BinOp::Ge => (CmpKind::Le, Some(Direction::Dec), (**rhs).clone()),
            BinOp::Ne => (CmpKind::Ne, None, (**rhs).clone()),
            _ => return fail("loop condition is not a comparison on the iterator"),
        },
        _ => return fail("loop condition does not compare the loop iterator"),
    };
    let Some(step) = &fl.step else {
        return fail("no iterator increment");
    };
    if step.var != iterator {
        return fail("the increment does not update the loop iterator");
    }
    let direction = match step.dir {
        StepDir::Inc => Direction::Inc,
        StepDir::Dec => Direction::Dec,
    };
    if let Some(cd) = cond_dir {
        if cd != direction {
            return fail("loop condition and increment direction diverge");
        }
    }
    if let Expr::Int(v) = step.amount {
        if v == 0 {
            return fail("literal step of zero");
        }
        if v < 0 {
            return fail("negative literal step; write the decrementing form instead");
        }
        if cmp == CmpKind::Ne && v != 1 {
            return fail("`i != end` condition is only canonical with step 1");
        }
    } else if cmp == CmpKind::Ne {
        return fail("`i != end` condition is only canonical with step 1");
    }
    // the body must not mutate the iterator
    let mut mutated = false;
    visit_stmts(&fl.body, &mut |s| match s {
        Stmt::Assign { target, .. } if target.base_name() == iterator => mutated = true,
        Stmt::For(inner) => {
            if let Some(init) = &inner.init {
                if init.name() == iterator {
                    mutated = true;
                }
            }
            if let Some(st) = &inner.step {
                if st.var == iterator {
                    mutated = true;
                }
            }
        }
        _ => {}
    });
    if mutated {
        return fail("iterator is mutated inside the loop body");
    }
    Ok(CanonicalLoop {
        iterator,
        start,
        end,
        step: step.amount.clone(),
        cmp,
        direction,
        body: fl.body.clone(),
        iter_declared,
    })
}

/// Total number of for-loops anywhere in the function.
pub fn for_loop_count(f: &SourceFunction) -> usize {
    let mut n = 0;
    visit_stmts(&f.body, &mut |s| {
        if matches!(s, Stmt::For(_)) {
            n += 1;
        }
    });
    n
}

/// Maximum for-loop nesting depth.
pub fn loop_nest_depth(f: &SourceFunction) -> usize {
    fn depth(body: &[Stmt]) -> usize {
        body.iter()
            .map(|s| match s {
                Stmt::For(fl) => 1 + depth(&fl.body),
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => depth(then_body).max(else_body.as_deref().map(depth).unwrap_or(0)),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }
    depth(&f.body)
}

/// The function's single loop, canonicalized. Errors if the function has no
/// loop, more than one, or a non-canonical one.
pub fn sole_canonical_loop(f: &SourceFunction) -> Result<CanonicalLoop, LoopModelError> {
    let count = for_loop_count(f);
    if count == 0 {
        return Err(LoopModelError::NoLoop);
    }
    if count > 1 {
        return Err(LoopModelError::MultipleLoops(count));
    }
    let loops = extract_canonical_loops(f);
    Ok(loops.into_iter().next().unwrap()?)
}

/// The first loop in program order, canonicalized. Vectorized candidates with
/// a scalar epilogue put the vector loop first, so alignment reads this one.
pub fn first_canonical_loop(f: &SourceFunction) -> Result<CanonicalLoop, LoopModelError> {
    let loops = extract_canonical_loops(f);
    match loops.into_iter().next() {
        None => Err(LoopModelError::NoLoop),
        Some(l) => Ok(l?),
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Compute the alignment plan for a scalar/vector loop pair.
pub fn compute_alignment(
    src: &CanonicalLoop,
    vec: &CanonicalLoop,
) -> Result<AlignmentPlan, LoopModelError> {
    let s1 = src.literal_step().ok_or_else(|| {
        LoopModelError::UnsupportedStep(format!(
            "source step `{}` is not a positive constant literal",
            print_expr(&src.step)
        ))
    })?;
    let s2 = vec.literal_step().ok_or_else(|| {
        LoopModelError::UnsupportedStep(format!(
            "vector step `{}` is not a positive constant literal",
            print_expr(&vec.step)
        ))
    })?;
    if src.direction != vec.direction {
        return Err(LoopModelError::DirectionMismatch);
    }
    let v = lcm(u64::from(s1), u64::from(s2)) as u32;
    let m = v / s1;
    let assumption = Expr::binary(
        BinOp::Eq,
        Expr::binary(BinOp::Mod, src.span_expr(), Expr::Int(i64::from(m))),
        Expr::Int(0),
    );
    Ok(AlignmentPlan {
        v,
        m,
        assumption,
        vector_unroll: 1,
    })
}

/// Alignment plan for a requested unroll factor, with the vectorized side
/// implied: stride `m * step`, unrolled once. What `transform --unroll m`
/// and the C bindings use when no explicit vector loop is at hand.
pub fn plan_for_unroll_factor(f: &SourceFunction, m: u32) -> Result<AlignmentPlan, LoopModelError> {
    if m == 0 {
        return Err(LoopModelError::UnsupportedStep(
            "unroll factor must be >= 1".to_string(),
        ));
    }
    let cl = sole_canonical_loop(f)?;
    let step = cl.literal_step().ok_or_else(|| {
        LoopModelError::UnsupportedStep(format!(
            "step `{}` is not a positive constant literal",
            print_expr(&cl.step)
        ))
    })?;
    let synthetic_vec = CanonicalLoop {
        step: Expr::Int(i64::from(step * m)),
        ..cl.clone()
    };
    compute_alignment(&cl, &synthetic_vec)
}

/// Locate the top-level for that contains a nested for, requiring exactly one.
fn outer_loop_position(f: &SourceFunction) -> Option<usize> {
    let mut found = None;
    for (i, stmt) in f.body.iter().enumerate() {
        if let Stmt::For(fl) = stmt {
            let has_inner = fl.body.iter().any(|s| matches!(s, Stmt::For(_)));
            if has_inner {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
    }
    found
}

/// True iff both functions nest at least two deep and the outer loops are
/// syntactically identical: same header, and every outer-body statement other
/// than the (single, same-position) inner loop is equal.
pub fn check_outer_loops_identical(src: &SourceFunction, vec: &SourceFunction) -> bool {
    if loop_nest_depth(src) < 2 || loop_nest_depth(vec) < 2 {
        return false;
    }
    let (Some(si), Some(vi)) = (outer_loop_position(src), outer_loop_position(vec)) else {
        return false;
    };
    let (Stmt::For(sl), Stmt::For(vl)) = (&src.body[si], &vec.body[vi]) else {
        return false;
    };
    if sl.init != vl.init || sl.cond != vl.cond || sl.step != vl.step {
        return false;
    }
    if sl.body.len() != vl.body.len() {
        return false;
    }
    let inner_src: Vec<usize> = sl
        .body
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Stmt::For(_)))
        .map(|(i, _)| i)
        .collect();
    let inner_vec: Vec<usize> = vl
        .body
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Stmt::For(_)))
        .map(|(i, _)| i)
        .collect();
    if inner_src.len() != 1 || inner_src != inner_vec {
        return false;
    }
    sl.body
        .iter()
        .zip(vl.body.iter())
        .enumerate()
        .all(|(i, (a, b))| i == inner_src[0] || a == b)
}

/// Outcome of the splitting dependence screen. Conservative by construction:
/// a false "ineligible" only costs a verification opportunity, a false
/// "eligible" would be unsound, so every doubt lands in `reasons`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependenceReport {
    pub eligible_for_splitting: bool,
    pub reasons: Vec<String>,
    pub output_arrays: BTreeSet<String>,
    pub input_arrays: BTreeSet<String>,
}

/// Arrays the function reads and writes; an array can be in both sets.
pub fn classify_output_arrays(f: &SourceFunction) -> (BTreeSet<String>, BTreeSet<String>) {
    let report = collect_array_accesses(f);
    (report.read_arrays(), report.written_arrays())
}

fn array_names(f: &SourceFunction) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = f
        .params
        .iter()
        .filter(|p| p.kind == ParamKind::IntArray)
        .map(|p| p.name.clone())
        .collect();
    names.extend(f.externs.iter().cloned());
    names
}

pub fn check_splitting_eligibility(src: &SourceFunction, vec: &SourceFunction) -> DependenceReport {
    let mut reasons = Vec::new();
    let (inputs, outputs) = classify_output_arrays(src);

    let src_loop = single_top_level_loop(src, "source", &mut reasons);
    let vec_loop = single_top_level_loop(vec, "vectorized", &mut reasons);

    if let Some(sl) = &src_loop {
        // condition (1a): the source touches only the i-th element of every array
        for access in &collect_body_accesses(&sl.body).entries {
            if access.index != Expr::Var(sl.iterator.clone()) {
                reasons.push(format!(
                    "source accesses {}[{}], not the loop iterator",
                    access.array,
                    print_expr(&access.index)
                ));
            }
        }
        // condition (2): no scalar value lives across iterations
        check_scalar_liveness(&sl.body, &sl.iterator, "source", &mut reasons);
        check_uniform_control(&sl.body, "source", &mut reasons);
        if sl.direction != Direction::Inc {
            reasons.push("decrementing loops are not handled by splitting".to_string());
        }
    }
    if let Some(vl) = &vec_loop {
        // condition (1b): the vector side only touches vectors starting at &x[i]
        check_vec_accesses(&vl.body, &array_names(vec), &vl.iterator, &mut reasons);
        check_scalar_liveness(&vl.body, &vl.iterator, "vectorized", &mut reasons);
        check_uniform_control(&vl.body, "vectorized", &mut reasons);
        if vl.direction != Direction::Inc {
            reasons.push("decrementing loops are not handled by splitting".to_string());
        }
    }
    if let (Some(sl), Some(vl)) = (&src_loop, &vec_loop) {
        if sl.start != vl.start {
            reasons.push(format!(
                "loop start expressions differ: `{}` vs `{}`",
                print_expr(&sl.start),
                print_expr(&vl.start)
            ));
        }
    }

    reasons.sort();
    reasons.dedup();
    DependenceReport {
        eligible_for_splitting: reasons.is_empty(),
        reasons,
        output_arrays: outputs,
        input_arrays: inputs,
    }
}

fn single_top_level_loop(
    f: &SourceFunction,
    side: &str,
    reasons: &mut Vec<String>,
) -> Option<CanonicalLoop> {
    if for_loop_count(f) != 1 {
        reasons.push(format!(
            "{side} function must contain exactly one loop (found {})",
            for_loop_count(f)
        ));
        return None;
    }
    let pos = f.body.iter().position(|s| matches!(s, Stmt::For(_)))?;
    // statements after the loop would observe pre-write-back array state
    if pos + 1 != f.body.len() {
        reasons.push(format!("{side} function has statements after the loop"));
    }
    // statements before the loop may read arrays but must not write them
    for stmt in &f.body[..pos] {
        let mut writes_array = false;
        if let Stmt::Assign {
            target: LValue::Index(_, _),
            ..
        } = stmt
        {
            writes_array = true;
        }
        if let Stmt::Expr(e) = stmt {
            let mut has_store = false;
            let mut scan = |e: &Expr| {
                if let Expr::Call(name, _) = e {
                    if name.contains("store") {
                        has_store = true;
                    }
                }
            };
            visit_exprs(std::slice::from_ref(stmt), &mut scan);
            let _ = e;
            writes_array |= has_store;
        }
        if writes_array {
            reasons.push(format!("{side} function writes an array before the loop"));
        }
    }
    match sole_canonical_loop(f) {
        Ok(l) => Some(l),
        Err(e) => {
            reasons.push(format!("{side} loop is not canonical: {e}"));
            None
        }
    }
}

fn collect_body_accesses(body: &[Stmt]) -> AccessReport {
    let wrapper = SourceFunction {
        name: String::new(),
        return_type: CType::Void,
        params: Vec::new(),
        externs: Vec::new(),
        includes: Vec::new(),
        body: body.to_vec(),
    };
    collect_array_accesses(&wrapper)
}

/// On the vectorized side an array may appear only as `&x[i]` or `x + i`
/// (under casts, as a call argument), pointing at the vector that starts at
/// the current iteration.
fn check_vec_accesses(
    body: &[Stmt],
    arrays: &BTreeSet<String>,
    iter: &str,
    reasons: &mut Vec<String>,
) {
    fn is_vector_base(e: &Expr, arrays: &BTreeSet<String>, iter: &str) -> Option<String> {
        match e {
            Expr::Cast(_, inner) => is_vector_base(inner, arrays, iter),
            Expr::Unary(UnOp::AddrOf, inner) => match &**inner {
                Expr::Index(base, idx) if arrays.contains(base) => {
                    if **idx == Expr::Var(iter.to_string()) {
                        Some(base.clone())
                    } else {
                        None
                    }
                }
                _ => None,
            },
            Expr::Binary(BinOp::Add, l, r) => match (&**l, &**r) {
                (Expr::Var(base), Expr::Var(i)) if arrays.contains(base) && i == iter => {
                    Some(base.clone())
                }
                _ => None,
            },
            _ => None,
        }
    }

    fn scan(e: &Expr, arrays: &BTreeSet<String>, iter: &str, reasons: &mut Vec<String>) {
        if let Some(_base) = is_vector_base(e, arrays, iter) {
            return; // a conforming vector access; don't descend
        }
        match e {
            Expr::Var(n) if arrays.contains(n) => reasons.push(format!(
                "vectorized side uses array `{n}` outside the &{n}[i] vector form"
            )),
            Expr::Index(base, idx) => {
                if arrays.contains(base) {
                    reasons.push(format!(
                        "vectorized side accesses {base}[{}] directly",
                        print_expr(idx)
                    ));
                }
                scan(idx, arrays, iter, reasons);
            }
            Expr::Unary(_, inner) | Expr::Cast(_, inner) => scan(inner, arrays, iter, reasons),
            Expr::Binary(_, l, r) => {
                scan(l, arrays, iter, reasons);
                scan(r, arrays, iter, reasons);
            }
            Expr::Call(_, args) => {
                for a in args {
                    scan(a, arrays, iter, reasons);
                }
            }
            Expr::Int(_) | Expr::Var(_) => {}
        }
    }

    let wrapper = SourceFunction {
        name: String::new(),
        return_type: CType::Void,
        params: Vec::new(),
        externs: Vec::new(),
        includes: Vec::new(),
        body: body.to_vec(),
    };
    // walk statement-level expressions, including assignment targets
    visit_stmts(&wrapper.body, &mut |s| match s {
        Stmt::Assign { target, value, .. } => {
            if let LValue::Index(base, idx) = target {
                if arrays.contains(base) {
                    reasons.push(format!(
                        "vectorized side assigns {base}[{}] directly",
                        print_expr(idx)
                    ));
                }
                scan(idx, arrays, iter, reasons);
            }
            scan(value, arrays, iter, reasons);
        }
        Stmt::Decl { vars, .. } => {
            for (_, init) in vars {
                if let Some(e) = init {
                    scan(e, arrays, iter, reasons);
                }
            }
        }
        Stmt::If { cond, .. } => scan(cond, arrays, iter, reasons),
        Stmt::Expr(e) | Stmt::Return(Some(e)) => scan(e, arrays, iter, reasons),
        _ => {}
    });
}

/// Every non-iterator scalar written in the loop body must be freshly
/// defined each iteration: its first access, in top-level statement order,
/// is an unconditional write. `s += 2` reads before writing; `j++` likewise;
/// both are loop-carried and get flagged.
fn check_scalar_liveness(body: &[Stmt], iter: &str, side: &str, reasons: &mut Vec<String>) {
    let mut written: BTreeSet<String> = BTreeSet::new();
    let mut cond_written: BTreeSet<String> = BTreeSet::new();
    let mut read_before_def: BTreeSet<String> = BTreeSet::new();
    let mut defined: BTreeSet<String> = BTreeSet::new();

    fn expr_reads(e: &Expr, out: &mut Vec<String>) {
        match e {
            Expr::Var(n) => out.push(n.clone()),
            Expr::Index(_, idx) => expr_reads(idx, out),
            Expr::Unary(_, inner) | Expr::Cast(_, inner) => expr_reads(inner, out),
            Expr::Binary(_, l, r) => {
                expr_reads(l, out);
                expr_reads(r, out);
            }
            Expr::Call(_, args) => {
                for a in args {
                    expr_reads(a, out);
                }
            }
            Expr::Int(_) => {}
        }
    }

    fn nested_writes(body: &[Stmt], out: &mut BTreeSet<String>) {
        visit_stmts(body, &mut |s| {
            if let Stmt::Assign {
                target: LValue::Var(n),
                ..
            } = s
            {
                out.insert(n.clone());
            }
            if let Stmt::Decl { vars, .. } = s {
                for (n, _) in vars {
                    out.insert(n.clone());
                }
            }
        });
    }

    fn nested_reads(body: &[Stmt], out: &mut Vec<String>) {
        visit_exprs(body, &mut |e| {
            if let Expr::Var(n) = e {
                out.push(n.clone());
            }
        });
    }

    for stmt in body {
        let mut reads = Vec::new();
        let mut uncond_defs = Vec::new();
        match stmt {
            Stmt::Decl { vars, .. } => {
                for (name, init) in vars {
                    if let Some(e) = init {
                        expr_reads(e, &mut reads);
                        uncond_defs.push(name.clone());
                        written.insert(name.clone());
                    }
                }
            }
            Stmt::Assign { target, op, value } => {
                if let LValue::Index(_, idx) = target {
                    expr_reads(idx, &mut reads);
                    expr_reads(value, &mut reads);
                } else if let LValue::Var(n) = target {
                    if *op != AssignOp::Set {
                        reads.push(n.clone()); // compound assignment reads first
                    }
                    expr_reads(value, &mut reads);
                    uncond_defs.push(n.clone());
                    written.insert(n.clone());
                }
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                expr_reads(cond, &mut reads);
                nested_reads(then_body, &mut reads);
                if let Some(eb) = else_body {
                    nested_reads(eb, &mut reads);
                }
                nested_writes(then_body, &mut cond_written);
                if let Some(eb) = else_body {
                    nested_writes(eb, &mut cond_written);
                }
            }
            Stmt::For(fl) => {
                nested_reads(&fl.body, &mut reads);
                nested_writes(&fl.body, &mut cond_written);
            }
            Stmt::Expr(e) | Stmt::Return(Some(e)) => expr_reads(e, &mut reads),
            _ => {}
        }
        for r in reads {
            if r != iter && !defined.contains(&r) {
                read_before_def.insert(r);
            }
        }
        for d in uncond_defs {
            defined.insert(d);
        }
    }

    written.extend(cond_written.iter().cloned());
    for var in &written {
        if var == iter {
            continue;
        }
        let fresh = defined.contains(var) && !read_before_def.contains(var);
        if !fresh {
            reasons.push(format!(
                "{side} scalar `{var}` is live across loop iterations"
            ));
        }
    }
}

fn check_uniform_control(body: &[Stmt], side: &str, reasons: &mut Vec<String>) {
    let mut labels: BTreeSet<String> = BTreeSet::new();
    visit_stmts(body, &mut |s| {
        if let Stmt::Label(l) = s {
            labels.insert(l.clone());
        }
    });
    visit_stmts(body, &mut |s| match s {
        Stmt::Break => reasons.push(format!("{side} loop body contains break")),
        Stmt::Return(_) => reasons.push(format!("{side} loop body contains return")),
        Stmt::Goto(l) if !labels.contains(l) => {
            reasons.push(format!("{side} loop body jumps out via goto {l}"))
        }
        _ => {}
    });
}
