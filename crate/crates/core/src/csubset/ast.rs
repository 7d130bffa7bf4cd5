//! AST for the restricted C subset: TSVC-style integer loop kernels and
//! their AVX2-intrinsic counterparts.

use serde::{Deserialize, Serialize};

/// Types expressible in the subset. `__m256i` is opaque: the parser records
/// vector values and intrinsic calls without modeling their semantics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CType {
    Void,
    Int,
    M256i,
    Ptr(Box<CType>),
}

impl CType {
    pub fn ptr_to(inner: CType) -> CType {
        CType::Ptr(Box::new(inner))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    ScalarInt,
    IntArray,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub kind: ParamKind,
}

/// One parsed kernel function, printable back to a standalone translation unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFunction {
    pub name: String,
    pub return_type: CType,
    pub params: Vec<Parameter>,
    /// File-scope `extern int x[];` declarations preceding the function.
    pub externs: Vec<String>,
    /// Header names from `#include <...>` lines, e.g. `immintrin.h`.
    pub includes: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
    AddrOf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Var(String),
    /// `base[index]`; the base is always an identifier so dependence
    /// analysis can report (array, index expression) pairs directly.
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Calls are opaque; `_mm256_*` intrinsic calls land here.
    Call(String, Vec<Expr>),
    Cast(CType, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn index(base: &str, idx: Expr) -> Expr {
        Expr::Index(base.to_string(), Box::new(idx))
    }

    pub fn is_intrinsic_call(&self) -> bool {
        matches!(self, Expr::Call(name, _) if name.starts_with("_mm") || name.starts_with("__builtin"))
    }
}

/// Assignment operators, covering plain and compound assignment. `x++;` and
/// `x--;` statements normalize to Add/Sub with a literal 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn base_name(&self) -> &str {
        match self {
            LValue::Var(n) => n,
            LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForInit {
    /// `int i = 0`
    Decl {
        ty: CType,
        name: String,
        value: Expr,
    },
    /// `i = 0`
    Assign { name: String, value: Expr },
}

impl ForInit {
    pub fn name(&self) -> &str {
        match self {
            ForInit::Decl { name, .. } | ForInit::Assign { name, .. } => name,
        }
    }

    pub fn value(&self) -> &Expr {
        match self {
            ForInit::Decl { value, .. } | ForInit::Assign { value, .. } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepDir {
    Inc,
    Dec,
}

/// Canonical form of a for-loop increment. `i++`, `++i` and `i += 1` all
/// normalize to `Inc` by literal 1, which is what makes `ast_equal` blind to
/// the pre/post distinction for discarded values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForStep {
    pub var: String,
    pub dir: StepDir,
    pub amount: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForLoop {
    pub init: Option<ForInit>,
    pub cond: Option<Expr>,
    pub step: Option<ForStep>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stmt {
    /// One base type, one or more declarators with optional initializers:
    /// `__m256i a_vec, b_vec;` or `int s = 0;`.
    Decl {
        ty: CType,
        vars: Vec<(String, Option<Expr>)>,
    },
    Assign {
        target: LValue,
        op: AssignOp,
        value: Expr,
    },
    For(ForLoop),
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    Goto(String),
    /// A label definition; prints as `name:;` so a label may end a block.
    Label(String),
    Break,
    Return(Option<Expr>),
    /// Expression evaluated for effect; intrinsic store calls land here.
    Expr(Expr),
}

impl Stmt {
    pub fn assign(target: LValue, op: AssignOp, value: Expr) -> Stmt {
        Stmt::Assign { target, op, value }
    }
}

/// Structural equality after parse-time normalization (whitespace and
/// comments gone, literal forms normalized, for-steps canonicalized).
/// This is the syntactic identity check used for outer loops.
pub fn ast_equal(a: &SourceFunction, b: &SourceFunction) -> bool {
    a == b
}

/// Statement-list equality under the same normalization.
pub fn stmts_equal(a: &[Stmt], b: &[Stmt]) -> bool {
    a == b
}

/// Walk every statement in a body, depth-first, visiting nested bodies.
pub fn visit_stmts<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in body {
        f(stmt);
        match stmt {
            Stmt::For(fl) => visit_stmts(&fl.body, f),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                visit_stmts(then_body, f);
                if let Some(eb) = else_body {
                    visit_stmts(eb, f);
                }
            }
            _ => {}
        }
    }
}

/// Walk every expression in a body, including lvalue index expressions,
/// for-header expressions, and initializers.
pub fn visit_exprs<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    fn walk_expr<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
        f(e);
        match e {
            Expr::Index(_, idx) => walk_expr(idx, f),
            Expr::Unary(_, inner) | Expr::Cast(_, inner) => walk_expr(inner, f),
            Expr::Binary(_, l, r) => {
                walk_expr(l, f);
                walk_expr(r, f);
            }
            Expr::Call(_, args) => {
                for a in args {
                    walk_expr(a, f);
                }
            }
            Expr::Int(_) | Expr::Var(_) => {}
        }
    }
    for stmt in body {
        match stmt {
            Stmt::Decl { vars, .. } => {
                for (_, init) in vars {
                    if let Some(e) = init {
                        walk_expr(e, f);
                    }
                }
            }
            Stmt::Assign { target, value, .. } => {
                if let LValue::Index(_, idx) = target {
                    walk_expr(idx, f);
                }
                walk_expr(value, f);
            }
            Stmt::For(fl) => {
                if let Some(init) = &fl.init {
                    walk_expr(init.value(), f);
                }
                if let Some(c) = &fl.cond {
                    walk_expr(c, f);
                }
                if let Some(s) = &fl.step {
                    walk_expr(&s.amount, f);
                }
                visit_exprs(&fl.body, f);
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
            } => {
                walk_expr(cond, f);
                visit_exprs(then_body, f);
                if let Some(eb) = else_body {
                    visit_exprs(eb, f);
                }
            }
            Stmt::Return(Some(e)) | Stmt::Expr(e) => walk_expr(e, f),
            Stmt::Goto(_) | Stmt::Label(_) | Stmt::Break | Stmt::Return(None) => {}
        }
    }
}
