//! Recursive descent parser for the C subset.
//!
//! The subset covers exactly what TSVC-style integer kernels and their
//! AVX2-vectorized counterparts need: one function per file, scalar-int and
//! int-array parameters, for/if/goto/label/break/return statements, 32-bit
//! integer expressions, and opaque `_mm256_*` intrinsic calls. Anything else
//! is a ParseError carrying line and column.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;

pub fn parse_function(text: &str) -> Result<SourceFunction, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.parse_file()?;
    validate(&f)?;
    Ok(f)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos.min(self.toks.len() - 1)];
        (t.line, t.col)
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::new(line, col, msg)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {want:?}, found {:?}", self.peek())))
        }
    }

    fn eat_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => Err(self.error(format!("expected identifier, found {other:?}"))),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`, found {:?}", self.peek())))
        }
    }

    fn parse_file(&mut self) -> Result<SourceFunction, ParseError> {
        let mut includes = Vec::new();
        let mut externs = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Include(h) => {
                    self.bump();
                    includes.push(h);
                }
                Tok::Ident(ref s) if s == "extern" => {
                    self.bump();
                    self.eat_kw("int")?;
                    let name = self.eat_ident()?;
                    self.eat(&Tok::LBracket)?;
                    self.eat(&Tok::RBracket)?;
                    self.eat(&Tok::Semi)?;
                    externs.push(name);
                }
                _ => break,
            }
        }
        let return_type = if self.is_kw("void") {
            self.bump();
            CType::Void
        } else if self.is_kw("int") {
            self.bump();
            CType::Int
        } else {
            return Err(self.error(format!(
                "expected function return type `void` or `int`, found {:?}",
                self.peek()
            )));
        };
        let name = self.eat_ident()?;
        self.eat(&Tok::LParen)?;
        let mut params = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                // `void` as a lone parameter list means no parameters
                if self.is_kw("void") && params.is_empty() && self.peek_at(1) == &Tok::RParen {
                    self.bump();
                    break;
                }
                self.eat_kw("int")?;
                let mut kind = ParamKind::ScalarInt;
                if self.peek() == &Tok::Star {
                    self.bump();
                    kind = ParamKind::IntArray;
                }
                let pname = self.eat_ident()?;
                if self.peek() == &Tok::LBracket {
                    self.bump();
                    self.eat(&Tok::RBracket)?;
                    kind = ParamKind::IntArray;
                }
                params.push(Parameter { name: pname, kind });
                if self.peek() == &Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.eat(&Tok::RParen)?;
        self.eat(&Tok::LBrace)?;
        let body = self.parse_block_items()?;
        self.eat(&Tok::RBrace)?;
        if self.peek() != &Tok::Eof {
            return Err(self.error("expected end of file after the function definition"));
        }
        Ok(SourceFunction {
            name,
            return_type,
            params,
            externs,
            includes,
            body,
        })
    }

    /// Statements until the closing brace of the current block.
    fn parse_block_items(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while self.peek() != &Tok::RBrace && self.peek() != &Tok::Eof {
            if self.peek() == &Tok::Semi {
                self.bump(); // empty statement
                continue;
            }
            out.push(self.parse_stmt()?);
        }
        Ok(out)
    }

    /// A single statement or a braced block, as a statement list.
    fn parse_body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.peek() == &Tok::LBrace {
            self.bump();
            let items = self.parse_block_items()?;
            self.eat(&Tok::RBrace)?;
            Ok(items)
        } else if self.peek() == &Tok::Semi {
            self.bump();
            Ok(Vec::new())
        } else {
            Ok(vec![self.parse_stmt()?])
        }
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Ident(ref s) if s == "int" || s == "__m256i" => self.parse_decl(),
            Tok::Ident(ref s) if s == "for" => self.parse_for(),
            Tok::Ident(ref s) if s == "if" => self.parse_if(),
            Tok::Ident(ref s) if s == "goto" => {
                self.bump();
                let label = self.eat_ident()?;
                self.eat(&Tok::Semi)?;
                Ok(Stmt::Goto(label))
            }
            Tok::Ident(ref s) if s == "break" => {
                self.bump();
                self.eat(&Tok::Semi)?;
                Ok(Stmt::Break)
            }
            Tok::Ident(ref s) if s == "return" => {
                self.bump();
                if self.peek() == &Tok::Semi {
                    self.bump();
                    Ok(Stmt::Return(None))
                } else {
                    let e = self.parse_expr()?;
                    self.eat(&Tok::Semi)?;
                    Ok(Stmt::Return(Some(e)))
                }
            }
            Tok::Ident(ref s)
                if matches!(
                    s.as_str(),
                    "while"
                        | "do"
                        | "switch"
                        | "struct"
                        | "union"
                        | "enum"
                        | "continue"
                        | "float"
                        | "double"
                        | "char"
                        | "long"
                        | "short"
                        | "unsigned"
                ) =>
            {
                Err(self.error(format!("`{s}` is outside the supported C subset")))
            }
            Tok::Ident(_) if self.peek_at(1) == &Tok::Colon => {
                let label = self.eat_ident()?;
                self.bump(); // colon
                Ok(Stmt::Label(label))
            }
            Tok::PlusPlus | Tok::MinusMinus => {
                let op = if self.bump() == Tok::PlusPlus {
                    AssignOp::Add
                } else {
                    AssignOp::Sub
                };
                let lv = self.parse_lvalue()?;
                self.eat(&Tok::Semi)?;
                Ok(Stmt::Assign {
                    target: lv,
                    op,
                    value: Expr::Int(1),
                })
            }
            _ => self.parse_assign_or_expr(),
        }
    }

    fn parse_decl(&mut self) -> Result<Stmt, ParseError> {
        let ty = self.parse_base_type()?;
        let mut vars = Vec::new();
        loop {
            if self.peek() == &Tok::Star {
                return Err(self.error("pointer-typed locals are outside the supported subset"));
            }
            let name = self.eat_ident()?;
            if self.peek() == &Tok::LBracket {
                return Err(self.error("local arrays are outside the supported subset"));
            }
            let init = if self.peek() == &Tok::Assign {
                self.bump();
                Some(self.parse_expr()?)
            } else {
                None
            };
            vars.push((name, init));
            if self.peek() == &Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.eat(&Tok::Semi)?;
        Ok(Stmt::Decl { ty, vars })
    }

    fn parse_base_type(&mut self) -> Result<CType, ParseError> {
        match self.peek().clone() {
            Tok::Ident(ref s) if s == "int" => {
                self.bump();
                Ok(CType::Int)
            }
            Tok::Ident(ref s) if s == "__m256i" => {
                self.bump();
                Ok(CType::M256i)
            }
            Tok::Ident(ref s) if s == "void" => {
                self.bump();
                Ok(CType::Void)
            }
            other => Err(self.error(format!("expected a type name, found {other:?}"))),
        }
    }

    fn parse_for(&mut self) -> Result<Stmt, ParseError> {
        self.eat_kw("for")?;
        self.eat(&Tok::LParen)?;
        let init = if self.peek() == &Tok::Semi {
            None
        } else if self.is_kw("int") {
            self.bump();
            let name = self.eat_ident()?;
            self.eat(&Tok::Assign)?;
            let value = self.parse_expr()?;
            Some(ForInit::Decl {
                ty: CType::Int,
                name,
                value,
            })
        } else {
            let name = self.eat_ident()?;
            self.eat(&Tok::Assign)?;
            let value = self.parse_expr()?;
            Some(ForInit::Assign { name, value })
        };
        self.eat(&Tok::Semi)?;
        let cond = if self.peek() == &Tok::Semi {
            None
        } else {
            Some(self.parse_expr()?)
        };
        self.eat(&Tok::Semi)?;
        let step = if self.peek() == &Tok::RParen {
            None
        } else {
            Some(self.parse_for_step()?)
        };
        self.eat(&Tok::RParen)?;
        let body = self.parse_body()?;
        Ok(Stmt::For(ForLoop {
            init,
            cond,
            step,
            body,
        }))
    }

    /// For-header increments normalize here: `i++`, `++i`, `i += k`,
    /// `i = i + k` and the decrementing forms all become a ForStep.
    fn parse_for_step(&mut self) -> Result<ForStep, ParseError> {
        if self.peek() == &Tok::PlusPlus || self.peek() == &Tok::MinusMinus {
            let dir = if self.bump() == Tok::PlusPlus {
                StepDir::Inc
            } else {
                StepDir::Dec
            };
            let var = self.eat_ident()?;
            return Ok(ForStep {
                var,
                dir,
                amount: Expr::Int(1),
            });
        }
        let var = self.eat_ident()?;
        match self.bump() {
            Tok::PlusPlus => Ok(ForStep {
                var,
                dir: StepDir::Inc,
                amount: Expr::Int(1),
            }),
            Tok::MinusMinus => Ok(ForStep {
                var,
                dir: StepDir::Dec,
                amount: Expr::Int(1),
            }),
            Tok::PlusAssign => Ok(ForStep {
                var,
                dir: StepDir::Inc,
                amount: self.parse_expr()?,
            }),
            Tok::MinusAssign => Ok(ForStep {
                var,
                dir: StepDir::Dec,
                amount: self.parse_expr()?,
            }),
            Tok::Assign => {
                // i = i + k / i = i - k
                let e = self.parse_expr()?;
                match e {
                    Expr::Binary(BinOp::Add, lhs, rhs) if *lhs == Expr::Var(var.clone()) => {
                        Ok(ForStep {
                            var,
                            dir: StepDir::Inc,
                            amount: *rhs,
                        })
                    }
                    Expr::Binary(BinOp::Sub, lhs, rhs) if *lhs == Expr::Var(var.clone()) => {
                        Ok(ForStep {
                            var,
                            dir: StepDir::Dec,
                            amount: *rhs,
                        })
                    }
                    _ => Err(self.error(
                        "for-loop increment must be i++, i--, i += k, i -= k, or i = i ± k",
                    )),
                }
            }
            other => Err(self.error(format!(
                "unsupported for-loop increment starting with {other:?}"
            ))),
        }
    }

    fn parse_if(&mut self) -> Result<Stmt, ParseError> {
        self.eat_kw("if")?;
        self.eat(&Tok::LParen)?;
        let cond = self.parse_expr()?;
        self.eat(&Tok::RParen)?;
        let then_body = self.parse_body()?;
        let else_body = if self.is_kw("else") {
            self.bump();
            Some(self.parse_body()?)
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_body,
            else_body,
        })
    }

    fn parse_lvalue(&mut self) -> Result<LValue, ParseError> {
        let name = self.eat_ident()?;
        if self.peek() == &Tok::LBracket {
            self.bump();
            let idx = self.parse_expr()?;
            self.eat(&Tok::RBracket)?;
            Ok(LValue::Index(name, idx))
        } else {
            Ok(LValue::Var(name))
        }
    }

    fn parse_assign_or_expr(&mut self) -> Result<Stmt, ParseError> {
        let e = self.parse_expr()?;
        let assign_op = match self.peek() {
            Tok::Assign => Some(AssignOp::Set),
            Tok::PlusAssign => Some(AssignOp::Add),
            Tok::MinusAssign => Some(AssignOp::Sub),
            Tok::StarAssign => Some(AssignOp::Mul),
            Tok::SlashAssign => Some(AssignOp::Div),
            Tok::PercentAssign => Some(AssignOp::Mod),
            Tok::PlusPlus => Some(AssignOp::Add),
            Tok::MinusMinus => Some(AssignOp::Sub),
            _ => None,
        };
        match assign_op {
            Some(op) => {
                let is_incdec = matches!(self.peek(), Tok::PlusPlus | Tok::MinusMinus);
                self.bump();
                let target = match e {
                    Expr::Var(n) => LValue::Var(n),
                    Expr::Index(n, idx) => LValue::Index(n, *idx),
                    _ => return Err(self.error("assignment target must be a variable or x[i]")),
                };
                let value = if is_incdec {
                    Expr::Int(1)
                } else {
                    self.parse_expr()?
                };
                self.eat(&Tok::Semi)?;
                Ok(Stmt::Assign { target, op, value })
            }
            None => {
                self.eat(&Tok::Semi)?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    // expression parsing: precedence climbing

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.parse_bin(0)
    }

    fn parse_bin(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Star => (BinOp::Mul, 10),
                Tok::Slash => (BinOp::Div, 10),
                Tok::Percent => (BinOp::Mod, 10),
                Tok::Plus => (BinOp::Add, 9),
                Tok::Minus => (BinOp::Sub, 9),
                Tok::Lt => (BinOp::Lt, 8),
                Tok::Le => (BinOp::Le, 8),
                Tok::Gt => (BinOp::Gt, 8),
                Tok::Ge => (BinOp::Ge, 8),
                Tok::EqEq => (BinOp::Eq, 7),
                Tok::Ne => (BinOp::Ne, 7),
                Tok::AndAnd => (BinOp::And, 4),
                Tok::OrOr => (BinOp::Or, 3),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.parse_bin(prec + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                let inner = self.parse_unary()?;
                // fold negated literals so `-1` is a single node
                if let Expr::Int(v) = inner {
                    Ok(Expr::Int(-v))
                } else {
                    Ok(Expr::Unary(UnOp::Neg, Box::new(inner)))
                }
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.parse_unary()?)))
            }
            Tok::Amp => {
                self.bump();
                Ok(Expr::Unary(UnOp::AddrOf, Box::new(self.parse_unary()?)))
            }
            Tok::PlusPlus | Tok::MinusMinus => {
                Err(self.error("increment is only supported as a statement or for-loop step"))
            }
            Tok::LParen => {
                if self.is_cast_ahead() {
                    self.bump();
                    let mut ty = self.parse_base_type()?;
                    while self.peek() == &Tok::Star {
                        self.bump();
                        ty = CType::ptr_to(ty);
                    }
                    self.eat(&Tok::RParen)?;
                    let inner = self.parse_unary()?;
                    Ok(Expr::Cast(ty, Box::new(inner)))
                } else {
                    self.bump();
                    let e = self.parse_expr()?;
                    self.eat(&Tok::RParen)?;
                    Ok(e)
                }
            }
            _ => self.parse_postfix(),
        }
    }

    fn is_cast_ahead(&self) -> bool {
        if self.peek() != &Tok::LParen {
            return false;
        }
        matches!(self.peek_at(1), Tok::Ident(s) if s == "int" || s == "__m256i" || s == "void")
    }

    fn parse_postfix(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) => {
                self.bump();
                match self.peek() {
                    Tok::LParen => {
                        self.bump();
                        let mut args = Vec::new();
                        if self.peek() != &Tok::RParen {
                            loop {
                                args.push(self.parse_expr()?);
                                if self.peek() == &Tok::Comma {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                        }
                        self.eat(&Tok::RParen)?;
                        Ok(Expr::Call(name, args))
                    }
                    Tok::LBracket => {
                        self.bump();
                        let idx = self.parse_expr()?;
                        self.eat(&Tok::RBracket)?;
                        if self.peek() == &Tok::LBracket {
                            return Err(
                                self.error("multi-dimensional indexing is outside the subset")
                            );
                        }
                        Ok(Expr::Index(name, Box::new(idx)))
                    }
                    _ => Ok(Expr::Var(name)),
                }
            }
            other => Err(self.error(format!("expected an expression, found {other:?}"))),
        }
    }
}

/// Whole-function checks: identifier discipline and the goto scope rule
/// (jumping into a nested scope is rejected).
fn validate(f: &SourceFunction) -> Result<(), ParseError> {
    let mut declared: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for p in &f.params {
        declared.insert(p.name.clone());
    }
    for e in &f.externs {
        declared.insert(e.clone());
    }
    let mut labels: Vec<(String, Vec<usize>)> = Vec::new();
    let mut gotos: Vec<(String, Vec<usize>)> = Vec::new();

    fn scan(
        body: &[Stmt],
        path: &mut Vec<usize>,
        declared: &mut std::collections::BTreeSet<String>,
        labels: &mut Vec<(String, Vec<usize>)>,
        gotos: &mut Vec<(String, Vec<usize>)>,
    ) {
        for (i, stmt) in body.iter().enumerate() {
            match stmt {
                Stmt::Decl { vars, .. } => {
                    for (name, _) in vars {
                        declared.insert(name.clone());
                    }
                }
                Stmt::Label(l) => labels.push((l.clone(), path.clone())),
                Stmt::Goto(l) => gotos.push((l.clone(), path.clone())),
                Stmt::For(fl) => {
                    if let Some(ForInit::Decl { name, .. }) = &fl.init {
                        declared.insert(name.clone());
                    }
                    path.push(i);
                    scan(&fl.body, path, declared, labels, gotos);
                    path.pop();
                }
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    path.push(i);
                    scan(then_body, path, declared, labels, gotos);
                    if let Some(eb) = else_body {
                        path.push(usize::MAX);
                        scan(eb, path, declared, labels, gotos);
                        path.pop();
                    }
                    path.pop();
                }
                _ => {}
            }
        }
    }
    scan(
        &f.body,
        &mut Vec::new(),
        &mut declared,
        &mut labels,
        &mut gotos,
    );

    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            if labels[i].0 == labels[j].0 {
                return Err(ParseError::new(
                    0,
                    0,
                    format!("duplicate label `{}`", labels[i].0),
                ));
            }
        }
    }
    for (target, goto_path) in &gotos {
        match labels.iter().find(|(l, _)| l == target) {
            None => {
                return Err(ParseError::new(
                    0,
                    0,
                    format!("goto to undefined label `{target}`"),
                ))
            }
            Some((_, label_path)) => {
                // the label's scope must enclose (or be) the goto's scope
                if !goto_path.starts_with(label_path) {
                    return Err(ParseError::new(
                        0,
                        0,
                        format!("goto `{target}` jumps into a nested scope"),
                    ));
                }
            }
        }
    }

    let label_names: std::collections::BTreeSet<&String> = labels.iter().map(|(l, _)| l).collect();
    let mut bad: Option<String> = None;
    visit_exprs(&f.body, &mut |e| {
        if bad.is_some() {
            return;
        }
        match e {
            Expr::Var(n) | Expr::Index(n, _)
                if !declared.contains(n) && !label_names.contains(n) =>
            {
                bad = Some(n.clone());
            }
            _ => {}
        }
    });
    visit_stmts(&f.body, &mut |s| {
        if bad.is_some() {
            return;
        }
        if let Stmt::Assign { target, .. } = s {
            let n = target.base_name();
            if !declared.contains(n) {
                bad = Some(n.to_string());
            }
        }
    });
    if let Some(name) = bad {
        return Err(ParseError::new(
            0,
            0,
            format!("identifier `{name}` is neither a parameter, a declared local, nor a label"),
        ));
    }
    Ok(())
}
