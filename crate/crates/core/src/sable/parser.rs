use super::lexer::{tokenize, Tok, Token};
use super::*;

type Result<T> = std::result::Result<T, SableError>;

pub fn parse_program(text: &str) -> Result<SableProgram> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut program = SableProgram::default();
    loop {
        match &p.peek().tok {
            Tok::Eof => break,
            Tok::Newline => p.pos += 1,
            Tok::Name(n) if n == "traversal" => program.traversals.push(p.traversal()?),
            _ => return Err(p.error("expected `traversal`")),
        }
    }
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> SableError {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Op(o) => format!("`{o}`"),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of file".into(),
        };
        SableError::Syntax {
            line: t.line,
            column: t.col,
            message: format!("{}, found {found}", message.into()),
        }
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(&self.peek().tok, Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<()> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn name(&mut self) -> Result<String> {
        match &self.peek().tok {
            Tok::Name(n) => {
                let n = n.clone();
                self.next();
                Ok(n)
            }
            _ => Err(self.error("expected a name")),
        }
    }

    fn traversal(&mut self) -> Result<TraversalDef> {
        let line = self.peek().line;
        self.expect_kw("traversal")?;
        let mut t = TraversalDef::new(self.name()?, line);
        self.expect_op(":")?;
        self.expect(Tok::Newline, "end of line")?;
        self.expect(Tok::Indent, "an indented traversal body")?;
        while !matches!(self.peek().tok, Tok::Dedent | Tok::Eof) {
            self.sable_stmt(&mut t)?;
        }
        self.next();
        Ok(t)
    }

    fn end_of_line(&mut self) -> Result<()> {
        self.expect(Tok::Newline, "end of line")
    }

    fn sable_stmt(&mut self, t: &mut TraversalDef) -> Result<()> {
        let line = self.peek().line;
        let kw = match &self.peek().tok {
            Tok::Name(n) => n.clone(),
            _ => return Err(self.error("expected a traversal statement")),
        };
        match kw.as_str() {
            "fromTraversal" => {
                self.next();
                let traversal = self.name()?;
                self.expect_kw("importAspect")?;
                let mut aspects = vec![self.name()?];
                while self.eat_op(",") {
                    aspects.push(self.name()?);
                }
                self.end_of_line()?;
                t.imports.push(ImportDecl {
                    traversal,
                    aspects,
                    line,
                });
            }
            "sourceAnnotation" => {
                self.next();
                let var = self.name()?;
                let path = match self.peek().tok.clone() {
                    Tok::Str(s) => {
                        self.next();
                        Some(s)
                    }
                    Tok::Name(_) => {
                        let mut p = self.name()?;
                        while self.eat_op(".") {
                            p.push('.');
                            p.push_str(&self.name()?);
                        }
                        Some(p)
                    }
                    _ => None,
                };
                self.end_of_line()?;
                if t.annotation.is_some() {
                    return Err(SableError::Validation {
                        line,
                        message: format!("duplicate sourceAnnotation in traversal `{}`", t.name),
                    });
                }
                t.annotation = Some(AnnotationDecl { var, path, line });
            }
            "aspect" => {
                self.next();
                let name = self.name()?;
                self.expect_kw("aspectType")?;
                let ty_name = self.name()?;
                let ty = AspectType::parse(&ty_name).ok_or_else(|| SableError::Syntax {
                    line,
                    column: 1,
                    message: format!("unknown aspect type `{ty_name}`"),
                })?;
                self.end_of_line()?;
                t.aspects.push(AspectDecl { name, ty, line });
            }
            "triggerFrom" => {
                self.next();
                let aspect = self.name()?;
                self.expect_kw("atValue")?;
                let value = self.literal()?;
                self.end_of_line()?;
                t.triggers.push(TriggerDecl {
                    aspect,
                    value,
                    line,
                });
            }
            "utility" => {
                self.next();
                self.expect_op(":")?;
                self.end_of_line()?;
                self.expect(Tok::Indent, "an indented utility block")?;
                while !matches!(self.peek().tok, Tok::Dedent | Tok::Eof) {
                    if self.is_kw("def") {
                        t.utilities.push(self.funcdef()?);
                    } else if self.is_kw("import") || self.is_kw("from") {
                        let l = self.peek().line;
                        let mut words = Vec::new();
                        while !matches!(self.peek().tok, Tok::Newline | Tok::Eof) {
                            words.push(match self.next().tok {
                                Tok::Name(n) => n,
                                Tok::Op(o) => o.to_string(),
                                other => format!("{other:?}"),
                            });
                        }
                        self.end_of_line()?;
                        t.utility_imports.push((l, words.join(" ")));
                    } else {
                        return Err(self.error("expected `def` in utility block"));
                    }
                }
                self.next();
            }
            "pointcut" => {
                self.next();
                self.expect_op("(")?;
                let label = self.name()?;
                let mut params = Vec::new();
                while self.eat_op(",") {
                    params.push(self.name()?);
                }
                self.expect_op(")")?;
                self.expect_op(":")?;
                let body = self.block()?;
                t.pointcuts.push(Pointcut {
                    label,
                    params,
                    body,
                    line,
                });
            }
            "mergeAspects" => {
                self.next();
                self.expect_op("(")?;
                let a = self.name()?;
                self.expect_op(",")?;
                let b = self.name()?;
                self.expect_op(")")?;
                self.expect_op(":")?;
                let body = self.block()?;
                t.merges.push(MergeDef {
                    params: (a, b),
                    body,
                    line,
                });
            }
            _ => return Err(self.error("expected a traversal statement")),
        }
        Ok(())
    }

    fn literal(&mut self) -> Result<AspectValue> {
        let neg = self.eat_op("-");
        let t = self.next();
        Ok(match t.tok {
            Tok::Int(i) => AspectValue::Int(if neg { -i } else { i }),
            Tok::Str(s) if !neg => AspectValue::Str(s),
            Tok::Name(n) if !neg && n == "True" => AspectValue::Bool(true),
            Tok::Name(n) if !neg && n == "False" => AspectValue::Bool(false),
            Tok::Name(n) if !neg && n == "None" => AspectValue::None,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a literal"));
            }
        })
    }

    fn funcdef(&mut self) -> Result<FunctionDef> {
        let line = self.peek().line;
        self.expect_kw("def")?;
        let name = self.name()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        if !self.is_op(")") {
            params.push(self.name()?);
            while self.eat_op(",") {
                if self.is_op(")") {
                    break;
                }
                params.push(self.name()?);
            }
        }
        self.expect_op(")")?;
        self.expect_op(":")?;
        let body = self.block()?;
        Ok(FunctionDef {
            name,
            params,
            body,
            line,
        })
    }

    /// Either simple statements after the colon or an indented suite.
    fn block(&mut self) -> Result<Vec<Stmt>> {
        if self.peek().tok != Tok::Newline {
            return self.simple_stmts();
        }
        self.next();
        self.expect(Tok::Indent, "an indented block")?;
        let mut body = Vec::new();
        while !matches!(self.peek().tok, Tok::Dedent | Tok::Eof) {
            body.extend(self.stmt()?);
        }
        self.next();
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Vec<Stmt>> {
        let line = self.peek().line;
        if self.eat_kw("if") {
            let mut branches = vec![(self.expr()?, Vec::new())];
            self.expect_op(":")?;
            branches[0].1 = self.block()?;
            let mut orelse = Vec::new();
            loop {
                if self.eat_kw("elif") {
                    let c = self.expr()?;
                    self.expect_op(":")?;
                    branches.push((c, self.block()?));
                } else if self.eat_kw("else") {
                    self.expect_op(":")?;
                    orelse = self.block()?;
                    break;
                } else {
                    break;
                }
            }
            return Ok(vec![Stmt {
                kind: StmtKind::If { branches, orelse },
                line,
            }]);
        }
        if self.eat_kw("for") {
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.expr()?;
            self.expect_op(":")?;
            let body = self.block()?;
            return Ok(vec![Stmt {
                kind: StmtKind::For { target, iter, body },
                line,
            }]);
        }
        if self.is_kw("def") || self.is_kw("while") || self.is_kw("import") || self.is_kw("from") {
            return Err(self.error("statement not supported in advice code"));
        }
        self.simple_stmts()
    }

    fn simple_stmts(&mut self) -> Result<Vec<Stmt>> {
        let mut out = vec![self.simple()?];
        while self.eat_op(";") {
            if self.peek().tok == Tok::Newline {
                break;
            }
            out.push(self.simple()?);
        }
        self.end_of_line()?;
        Ok(out)
    }

    fn ends_simple(&self) -> bool {
        matches!(self.peek().tok, Tok::Newline | Tok::Eof) || self.is_op(";")
    }

    fn simple(&mut self) -> Result<Stmt> {
        let line = self.peek().line;
        let kind = if self.eat_kw("pass") {
            StmtKind::Pass
        } else if self.eat_kw("return") {
            StmtKind::Return(if self.ends_simple() {
                None
            } else {
                Some(self.expr_list()?)
            })
        } else if self.eat_kw("raise") {
            StmtKind::Raise(if self.ends_simple() {
                None
            } else {
                Some(self.expr()?)
            })
        } else {
            let e = self.expr_list()?;
            if self.eat_op("=") {
                let target = to_target(&e).ok_or_else(|| SableError::Syntax {
                    line,
                    column: 1,
                    message: "cannot assign to expression".into(),
                })?;
                let value = self.expr_list()?;
                StmtKind::Assign { target, value }
            } else if let Some(op) = self.aug_op() {
                let target = match to_target(&e) {
                    Some(t @ (Target::Name(_) | Target::Subscript(..))) => t,
                    _ => {
                        return Err(SableError::Syntax {
                            line,
                            column: 1,
                            message: "invalid augmented assignment target".into(),
                        })
                    }
                };
                let value = self.expr()?;
                StmtKind::AugAssign { target, op, value }
            } else {
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { kind, line })
    }

    fn aug_op(&mut self) -> Option<BinOp> {
        let op = match &self.peek().tok {
            Tok::Op("|=") => BinOp::BitOr,
            Tok::Op("&=") => BinOp::BitAnd,
            Tok::Op("-=") => BinOp::Sub,
            Tok::Op("+=") => BinOp::Add,
            Tok::Op("//=") => BinOp::FloorDiv,
            _ => return None,
        };
        self.next();
        Some(op)
    }

    fn target_list(&mut self) -> Result<Target> {
        let line = self.peek().line;
        let mut items = vec![self.target_atom()?];
        let mut tuple = false;
        while self.eat_op(",") {
            tuple = true;
            if self.is_kw("in") {
                break;
            }
            items.push(self.target_atom()?);
        }
        let _ = line;
        Ok(if tuple {
            Target::Tuple(items)
        } else {
            items.pop().unwrap_or(Target::Tuple(vec![]))
        })
    }

    fn target_atom(&mut self) -> Result<Target> {
        if self.eat_op("(") {
            let t = self.target_list()?;
            self.expect_op(")")?;
            return Ok(t);
        }
        Ok(Target::Name(self.name()?))
    }

    /// Comma-separated expressions form a tuple.
    fn expr_list(&mut self) -> Result<Expr> {
        let first = self.expr()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let line = first.line;
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.ends_simple() || self.is_op("=") {
                break;
            }
            items.push(self.expr()?);
        }
        Ok(Expr {
            kind: ExprKind::Tuple(items),
            line,
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let e = self.or_expr()?;
        if self.is_kw("if") && !matches!(self.peek_at(1), Tok::Newline) {
            self.next();
            let cond = self.or_expr()?;
            self.expect_kw("else")?;
            let orelse = self.expr()?;
            let line = e.line;
            return Ok(Expr {
                kind: ExprKind::IfExp {
                    cond: Box::new(cond),
                    then: Box::new(e),
                    orelse: Box::new(orelse),
                },
                line,
            });
        }
        Ok(e)
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut e = self.and_expr()?;
        while self.eat_kw("or") {
            let r = self.and_expr()?;
            let line = e.line;
            e = Expr {
                kind: ExprKind::Or(Box::new(e), Box::new(r)),
                line,
            };
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut e = self.not_expr()?;
        while self.eat_kw("and") {
            let r = self.not_expr()?;
            let line = e.line;
            e = Expr {
                kind: ExprKind::And(Box::new(e), Box::new(r)),
                line,
            };
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        let line = self.peek().line;
        if self.eat_kw("not") {
            let inner = self.not_expr()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Not, Box::new(inner)),
                line,
            });
        }
        self.comparison()
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match &self.peek().tok {
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::NotEq,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::LtE,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::GtE,
            Tok::Name(n) if n == "in" => CmpOp::In,
            Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                self.next();
                CmpOp::NotIn
            }
            Tok::Name(n) if n == "is" => {
                if matches!(self.peek_at(1), Tok::Name(m) if m == "not") {
                    self.next();
                    CmpOp::IsNot
                } else {
                    CmpOp::Is
                }
            }
            _ => return None,
        };
        self.next();
        Some(op)
    }

    fn comparison(&mut self) -> Result<Expr> {
        let first = self.bitor()?;
        let mut rest = Vec::new();
        while let Some(op) = self.cmp_op() {
            rest.push((op, self.bitor()?));
        }
        if rest.is_empty() {
            return Ok(first);
        }
        let line = first.line;
        Ok(Expr {
            kind: ExprKind::Compare(Box::new(first), rest),
            line,
        })
    }

    fn binary(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<Expr>,
    ) -> Result<Expr> {
        let mut e = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.eat_op(sym) {
                    let r = next(self)?;
                    let line = e.line;
                    e = Expr {
                        kind: ExprKind::Bin(*op, Box::new(e), Box::new(r)),
                        line,
                    };
                    continue 'outer;
                }
            }
            return Ok(e);
        }
    }

    fn bitor(&mut self) -> Result<Expr> {
        self.binary(&[("|", BinOp::BitOr)], Self::bitxor)
    }

    fn bitxor(&mut self) -> Result<Expr> {
        self.binary(&[("^", BinOp::BitXor)], Self::bitand)
    }

    fn bitand(&mut self) -> Result<Expr> {
        self.binary(&[("&", BinOp::BitAnd)], Self::arith)
    }

    fn arith(&mut self) -> Result<Expr> {
        self.binary(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::term)
    }

    fn term(&mut self) -> Result<Expr> {
        self.binary(
            &[
                ("*", BinOp::Mul),
                ("//", BinOp::FloorDiv),
                ("%", BinOp::Mod),
            ],
            Self::unary,
        )
    }

    fn unary(&mut self) -> Result<Expr> {
        let line = self.peek().line;
        if self.eat_op("-") {
            let inner = self.unary()?;
            if let ExprKind::Lit(AspectValue::Int(i)) = inner.kind {
                return Ok(Expr {
                    kind: ExprKind::Lit(AspectValue::Int(-i)),
                    line,
                });
            }
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Neg, Box::new(inner)),
                line,
            });
        }
        if self.eat_op("+") {
            return self.unary();
        }
        self.postfix()
    }

    fn args(&mut self, close: &str) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        while !self.is_op(close) {
            args.push(self.expr()?);
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(close)?;
        Ok(args)
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.atom()?;
        loop {
            let line = e.line;
            if self.eat_op("(") {
                let args = self.args(")")?;
                e = Expr {
                    kind: ExprKind::Call(Box::new(e), args),
                    line,
                };
            } else if self.eat_op("[") {
                let idx = self.expr()?;
                self.expect_op("]")?;
                e = Expr {
                    kind: ExprKind::Subscript(Box::new(e), Box::new(idx)),
                    line,
                };
            } else if self.eat_op(".") {
                let m = self.name()?;
                if !self.eat_op("(") {
                    return Err(self.error("attribute access is only supported for method calls"));
                }
                let args = self.args(")")?;
                e = Expr {
                    kind: ExprKind::Method(Box::new(e), m, args),
                    line,
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.peek().clone();
        let line = t.line;
        let lit = |v| Expr {
            kind: ExprKind::Lit(v),
            line,
        };
        match t.tok {
            Tok::Int(i) => {
                self.next();
                Ok(lit(AspectValue::Int(i)))
            }
            Tok::Str(mut s) => {
                self.next();
                while let Tok::Str(more) = &self.peek().tok {
                    s.push_str(more);
                    self.next();
                }
                Ok(lit(AspectValue::Str(s)))
            }
            Tok::Name(n) => {
                const RESERVED: &[&str] = &[
                    "and", "or", "not", "in", "is", "if", "else", "elif", "for", "return", "pass",
                    "raise", "def",
                ];
                if RESERVED.contains(&n.as_str()) {
                    return Err(self.error("expected an expression"));
                }
                self.next();
                Ok(match n.as_str() {
                    "True" => lit(AspectValue::Bool(true)),
                    "False" => lit(AspectValue::Bool(false)),
                    "None" => lit(AspectValue::None),
                    _ => Expr {
                        kind: ExprKind::Name(n),
                        line,
                    },
                })
            }
            Tok::Op("(") => {
                self.next();
                if self.eat_op(")") {
                    return Ok(Expr {
                        kind: ExprKind::Tuple(vec![]),
                        line,
                    });
                }
                let first = self.expr()?;
                if self.eat_op(")") {
                    return Ok(first);
                }
                self.expect_op(",")?;
                let mut items = vec![first];
                items.extend(self.args(")")?);
                Ok(Expr {
                    kind: ExprKind::Tuple(items),
                    line,
                })
            }
            Tok::Op("[") => {
                self.next();
                let items = self.args("]")?;
                Ok(Expr {
                    kind: ExprKind::List(items),
                    line,
                })
            }
            Tok::Op("{") => {
                self.next();
                if self.eat_op("}") {
                    return Ok(Expr {
                        kind: ExprKind::Dict(vec![]),
                        line,
                    });
                }
                let first = self.expr()?;
                if self.eat_op(":") {
                    let mut pairs = vec![(first, self.expr()?)];
                    while self.eat_op(",") {
                        if self.is_op("}") {
                            break;
                        }
                        let k = self.expr()?;
                        self.expect_op(":")?;
                        pairs.push((k, self.expr()?));
                    }
                    self.expect_op("}")?;
                    return Ok(Expr {
                        kind: ExprKind::Dict(pairs),
                        line,
                    });
                }
                let mut items = vec![first];
                if self.eat_op(",") {
                    items.extend(self.args("}")?);
                } else {
                    self.expect_op("}")?;
                }
                Ok(Expr {
                    kind: ExprKind::Set(items),
                    line,
                })
            }
            _ => Err(self.error("expected an expression")),
        }
    }
}

fn to_target(e: &Expr) -> Option<Target> {
    match &e.kind {
        ExprKind::Name(n) => Some(Target::Name(n.clone())),
        ExprKind::Subscript(v, i) => Some(Target::Subscript(v.clone(), i.clone())),
        ExprKind::Tuple(items) | ExprKind::List(items) => items
            .iter()
            .map(to_target)
            .collect::<Option<Vec<_>>>()
            .map(Target::Tuple),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_has_no_traversals() {
        assert_eq!(parse_program("").unwrap().traversals.len(), 0);
        assert_eq!(parse_program("# nothing\n\n").unwrap().traversals.len(), 0);
    }

    #[test]
    fn declarations() {
        let t = &parse_program(
            "traversal T:\n    fromTraversal S importAspect A, B\n    sourceAnnotation ann 'x.json'\n    aspect V aspectType bool\n    triggerFrom V atValue True\n    triggerFrom V atValue -1\n",
        )
        .unwrap()
        .traversals[0];
        assert_eq!(t.imports[0].aspects, vec!["A", "B"]);
        assert_eq!(
            t.annotation.as_ref().unwrap().path.as_deref(),
            Some("x.json")
        );
        assert_eq!(t.aspects[0].ty, AspectType::Bool);
        assert_eq!(
            t.triggers_of("V"),
            [AspectValue::Bool(true), AspectValue::Int(-1)].into()
        );
    }

    #[test]
    fn inline_and_suite_blocks() {
        let t = &parse_program(
            "traversal T:\n  aspect X aspectType set\n  pointcut(EnterProcedure, inputs): X = set(); Y = 1\n  pointcut(Assign, l, r):\n    if a in b and not c:\n      X |= {1, 2}\n    elif x is not None: pass\n    else:\n      X = X - {3}\n",
        )
        .unwrap()
        .traversals[0];
        assert_eq!(t.pointcuts[0].body.len(), 2);
        assert_eq!(t.pointcuts[1].params, vec!["l", "r"]);
        match &t.pointcuts[1].body[0].kind {
            StmtKind::If { branches, orelse } => {
                assert_eq!(branches.len(), 2);
                assert_eq!(orelse.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence() {
        let t =
            &parse_program("traversal T:\n  pointcut(Exp, e):\n    x = a | b & c - d == e or f\n")
                .unwrap()
                .traversals[0];
        let StmtKind::Assign { value, .. } = &t.pointcuts[0].body[0].kind else {
            panic!()
        };
        let ExprKind::Or(l, _) = &value.kind else {
            panic!()
        };
        let ExprKind::Compare(lhs, _) = &l.kind else {
            panic!()
        };
        assert!(matches!(lhs.kind, ExprKind::Bin(BinOp::BitOr, _, _)));
    }

    #[test]
    fn syntax_errors_are_positioned() {
        let e = parse_program("traversal T:\n  aspect X aspectType\n").unwrap_err();
        assert!(matches!(e, SableError::Syntax { line: 2, .. }), "{e}");
        let e = parse_program("traversal T:\n  pointcut(Exp, e):\n    x = = 1\n").unwrap_err();
        assert!(matches!(e, SableError::Syntax { line: 3, .. }), "{e}");
        assert!(parse_program("banana\n").is_err());
    }
}
