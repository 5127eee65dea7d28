use std::collections::BTreeSet;

use rustpython_parser::ast::{self, Expr, Ranged, Stmt};
use rustpython_parser::Parse;

use super::usage::Collector;
use super::{
    split_qualifier, Body, ExprUsage, FrontendError, LineIndex, ProcedureIR, StatementIR,
    StatementLabel as L,
};

type Result<T> = std::result::Result<T, FrontendError>;

/// Lowers the procedure or class named by `qualifier` (`path:Name`, `path:Outer.inner`).
pub fn parse_procedure(source: &str, qualifier: &str) -> Result<ProcedureIR> {
    let (path, name) = split_qualifier(qualifier)?;
    let lines = LineIndex::new(source);
    let suite = ast::Suite::parse(source, path).map_err(|e| {
        let off = u32::from(e.offset) as usize;
        FrontendError::Syntax {
            path: path.to_string(),
            line: lines.line(off),
            column: lines.column(off),
            message: e.error.to_string(),
        }
    })?;

    let mut found = Vec::new();
    collect_defs(&suite, "", &mut found);
    let target = found
        .iter()
        .find(|(q, _)| q == name)
        .or_else(|| {
            (!name.contains('.'))
                .then(|| {
                    found
                        .iter()
                        .find(|(q, _)| q.rsplit('.').next() == Some(name))
                })
                .flatten()
        })
        .map(|(_, s)| *s)
        .ok_or_else(|| FrontendError::NotFound(qualifier.to_string()))?;

    let mut lw = Lowerer {
        source,
        text_lines: source.lines().collect(),
        lines,
        next_point: 0,
    };
    let range = target.range();
    let line_start = lw.keyword_line_forward(lw.line_of(range.start()));
    let line_end = lw.last_line(range);

    let (inputs, container, body) = match target {
        Stmt::FunctionDef(f) => (params(&f.args), false, &f.body),
        Stmt::AsyncFunctionDef(f) => (params(&f.args), false, &f.body),
        Stmt::ClassDef(c) => (BTreeSet::new(), true, &c.body),
        _ => unreachable!("collect_defs only yields definitions"),
    };
    let statements = lw.block(body, container)?;
    Ok(ProcedureIR {
        qualifier: qualifier.to_string(),
        inputs,
        line_start,
        line_end,
        container,
        statements,
    })
}

fn def_name(s: &Stmt) -> Option<&str> {
    match s {
        Stmt::FunctionDef(f) => Some(f.name.as_str()),
        Stmt::AsyncFunctionDef(f) => Some(f.name.as_str()),
        Stmt::ClassDef(c) => Some(c.name.as_str()),
        _ => None,
    }
}

fn child_blocks(s: &Stmt) -> Vec<&[Stmt]> {
    match s {
        Stmt::FunctionDef(f) => vec![&f.body],
        Stmt::AsyncFunctionDef(f) => vec![&f.body],
        Stmt::ClassDef(c) => vec![&c.body],
        Stmt::If(i) => vec![&i.body, &i.orelse],
        Stmt::For(f) => vec![&f.body, &f.orelse],
        Stmt::AsyncFor(f) => vec![&f.body, &f.orelse],
        Stmt::While(w) => vec![&w.body, &w.orelse],
        Stmt::With(w) => vec![&w.body],
        Stmt::AsyncWith(w) => vec![&w.body],
        Stmt::Try(t) => try_blocks(&t.body, &t.handlers, &t.orelse, &t.finalbody),
        Stmt::TryStar(t) => try_blocks(&t.body, &t.handlers, &t.orelse, &t.finalbody),
        Stmt::Match(m) => m.cases.iter().map(|c| c.body.as_slice()).collect(),
        _ => vec![],
    }
}

fn try_blocks<'a>(
    body: &'a [Stmt],
    handlers: &'a [ast::ExceptHandler],
    orelse: &'a [Stmt],
    finalbody: &'a [Stmt],
) -> Vec<&'a [Stmt]> {
    let mut v = vec![body];
    v.extend(
        handlers
            .iter()
            .map(|ast::ExceptHandler::ExceptHandler(h)| h.body.as_slice()),
    );
    v.push(orelse);
    v.push(finalbody);
    v
}

/// Depth-first list of (dotted path, definition).
fn collect_defs<'a>(body: &'a [Stmt], prefix: &str, out: &mut Vec<(String, &'a Stmt)>) {
    for s in body {
        let inner = match def_name(s) {
            Some(n) => {
                let q = if prefix.is_empty() {
                    n.to_string()
                } else {
                    format!("{prefix}.{n}")
                };
                out.push((q.clone(), s));
                q
            }
            None => prefix.to_string(),
        };
        for b in child_blocks(s) {
            collect_defs(b, &inner, out);
        }
    }
}

fn params(args: &ast::Arguments) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = args
        .posonlyargs
        .iter()
        .chain(&args.args)
        .chain(&args.kwonlyargs)
        .map(|a| a.def.arg.to_string())
        .collect();
    out.extend(args.vararg.iter().map(|a| a.arg.to_string()));
    out.extend(args.kwarg.iter().map(|a| a.arg.to_string()));
    out
}

struct Lowerer<'s> {
    source: &'s str,
    text_lines: Vec<&'s str>,
    lines: LineIndex,
    next_point: u32,
}

impl<'s> Lowerer<'s> {
    fn line_of(&self, at: ast::text_size::TextSize) -> usize {
        self.lines.line(u32::from(at) as usize)
    }

    fn last_line(&self, r: ast::text_size::TextRange) -> usize {
        let end = u32::from(r.end()) as usize;
        let start = u32::from(r.start()) as usize;
        self.lines.line(end.saturating_sub(1).max(start))
    }

    fn alloc(&mut self) -> u32 {
        self.next_point += 1;
        self.next_point
    }

    fn keyword_line_forward(&self, from: usize) -> usize {
        (from..=self.text_lines.len())
            .find(|&l| {
                let t = self.text_lines[l - 1].trim_start();
                t.starts_with("def ") || t.starts_with("async ") || t.starts_with("class ")
            })
            .unwrap_or(from)
    }

    /// Line of an `else`/`finally` keyword, searched upward from the clause's first statement.
    fn keyword_line_back(&self, kw: &str, first: usize) -> usize {
        (1..=first.min(self.text_lines.len()))
            .rev()
            .find(|&l| {
                let t = self.text_lines[l - 1].trim_start();
                t.strip_prefix(kw)
                    .is_some_and(|rest| rest.starts_with(':') || rest.starts_with(' '))
            })
            .unwrap_or(first)
    }

    fn collector(&self) -> Collector<'s> {
        Collector::new(self.source)
    }

    fn load(&self, e: &Expr) -> ExprUsage {
        let mut c = self.collector();
        c.load(e);
        c.finish()
    }

    fn store(&self, targets: &[&Expr]) -> ExprUsage {
        let mut c = self.collector();
        targets.iter().for_each(|t| c.store(t));
        c.finish()
    }

    fn block(&mut self, stmts: &[Stmt], container: bool) -> Result<Vec<StatementIR>> {
        stmts.iter().map(|s| self.stmt(s, container)).collect()
    }

    fn simple(&self, point: u32, loc: usize, label: L, exprs: Vec<ExprUsage>) -> StatementIR {
        StatementIR {
            point,
            loc,
            end_loc: None,
            label,
            exprs,
            body: Body::None,
        }
    }

    fn clause(&mut self, label: L, kw: &str, body: &[Stmt]) -> Result<StatementIR> {
        let point = self.alloc();
        let first = self.line_of(body[0].range().start());
        let loc = self.keyword_line_back(kw, first);
        let end_loc = label
            .is_branching()
            .then(|| self.last_line(body[body.len() - 1].range()));
        Ok(StatementIR {
            point,
            loc,
            end_loc,
            label,
            exprs: vec![],
            body: Body::Block(self.block(body, false)?),
        })
    }

    fn stmt(&mut self, s: &Stmt, container: bool) -> Result<StatementIR> {
        let point = self.alloc();
        let range = s.range();
        let loc = self.line_of(range.start());
        let end_loc = self.last_line(range);
        let ir = match s {
            Stmt::Assign(a) => {
                let targets: Vec<&Expr> = a.targets.iter().collect();
                self.simple(
                    point,
                    loc,
                    L::Assign,
                    vec![self.store(&targets), self.load(&a.value)],
                )
            }
            Stmt::AugAssign(a) => {
                let lhs = self.store(&[&a.target]);
                let mut c = self.collector();
                c.load(&a.target);
                c.load(&a.value);
                self.simple(point, loc, L::Assign, vec![lhs, c.finish()])
            }
            Stmt::AnnAssign(a) => {
                let rhs = a.value.as_ref().map(|v| self.load(v)).unwrap_or_default();
                self.simple(point, loc, L::Assign, vec![self.store(&[&a.target]), rhs])
            }
            Stmt::TypeAlias(t) => self.simple(
                point,
                loc,
                L::Assign,
                vec![self.store(&[&t.name]), self.load(&t.value)],
            ),
            Stmt::Expr(e) => self.simple(point, loc, L::Exp, vec![self.load(&e.value)]),
            Stmt::Assert(a) => {
                let mut c = self.collector();
                c.load(&a.test);
                if let Some(m) = &a.msg {
                    c.load(m);
                }
                self.simple(point, loc, L::Exp, vec![c.finish()])
            }
            Stmt::Delete(d) => {
                let mut c = self.collector();
                d.targets.iter().for_each(|t| c.load(t));
                self.simple(point, loc, L::Exp, vec![c.finish()])
            }
            Stmt::Return(r) => {
                let u = r.value.as_ref().map(|v| self.load(v)).unwrap_or_default();
                self.simple(point, loc, L::Return, vec![u])
            }
            Stmt::Raise(r) => {
                let mut c = self.collector();
                for e in [&r.exc, &r.cause].into_iter().flatten() {
                    c.load(e);
                }
                self.simple(point, loc, L::Raise, vec![c.finish()])
            }
            Stmt::Pass(_) => self.simple(point, loc, L::Pass, vec![]),
            Stmt::Break(_) => self.simple(point, loc, L::Break, vec![]),
            Stmt::Continue(_) => self.simple(point, loc, L::Continue, vec![]),
            Stmt::Import(i) => {
                let mut c = self.collector();
                for a in &i.names {
                    match &a.asname {
                        Some(n) => c.def(n.to_string()),
                        None => c.def(a.name.split('.').next().unwrap_or_default().to_string()),
                    }
                }
                self.simple(point, loc, L::Import, vec![c.finish()])
            }
            Stmt::ImportFrom(i) => {
                let mut c = self.collector();
                for a in &i.names {
                    c.def(a.asname.as_ref().unwrap_or(&a.name).to_string());
                }
                self.simple(point, loc, L::Import, vec![c.finish()])
            }
            Stmt::Global(_) => return Err(unsupported("global", loc)),
            Stmt::Nonlocal(_) => return Err(unsupported("nonlocal", loc)),
            Stmt::FunctionDef(f) => {
                let mut c = self.collector();
                f.decorator_list.iter().for_each(|d| c.load(d));
                defaults(&mut c, &f.args);
                self.opaque(point, loc, f.name.as_str(), c)
            }
            Stmt::AsyncFunctionDef(f) => {
                let mut c = self.collector();
                f.decorator_list.iter().for_each(|d| c.load(d));
                defaults(&mut c, &f.args);
                self.opaque(point, loc, f.name.as_str(), c)
            }
            Stmt::ClassDef(k) => {
                let mut c = self.collector();
                k.decorator_list.iter().for_each(|d| c.load(d));
                k.bases.iter().for_each(|b| c.load(b));
                k.keywords.iter().for_each(|kw| c.load(&kw.value));
                self.opaque(point, loc, k.name.as_str(), c)
            }
            Stmt::If(i) => {
                let cond = self.load(&i.test);
                let then = self.block(&i.body, false)?;
                let orelse = self.block(&i.orelse, false)?;
                StatementIR {
                    point,
                    loc,
                    end_loc: Some(end_loc),
                    label: L::If,
                    exprs: vec![cond],
                    body: Body::If { then, orelse },
                }
            }
            Stmt::While(w) => {
                let cond = self.load(&w.test);
                self.looping(
                    point,
                    loc,
                    end_loc,
                    L::While,
                    vec![cond],
                    &w.body,
                    &w.orelse,
                )?
            }
            Stmt::For(f) => {
                let exprs = vec![self.store(&[&f.target]), self.load(&f.iter)];
                self.looping(point, loc, end_loc, L::For, exprs, &f.body, &f.orelse)?
            }
            Stmt::AsyncFor(f) => {
                let exprs = vec![self.store(&[&f.target]), self.load(&f.iter)];
                self.looping(point, loc, end_loc, L::For, exprs, &f.body, &f.orelse)?
            }
            Stmt::With(w) => self.with(point, loc, end_loc, &w.items, &w.body)?,
            Stmt::AsyncWith(w) => self.with(point, loc, end_loc, &w.items, &w.body)?,
            Stmt::Try(t) => self.try_stmt(
                point,
                loc,
                end_loc,
                &t.body,
                &t.handlers,
                &t.orelse,
                &t.finalbody,
            )?,
            Stmt::TryStar(t) => self.try_stmt(
                point,
                loc,
                end_loc,
                &t.body,
                &t.handlers,
                &t.orelse,
                &t.finalbody,
            )?,
            Stmt::Match(m) => {
                let subject = self.load(&m.subject);
                let mut cases = Vec::with_capacity(m.cases.len());
                for case in &m.cases {
                    let cpoint = self.alloc();
                    let cloc = self.line_of(case.pattern.range().start());
                    let mut c = self.collector();
                    c.pattern(&case.pattern);
                    if let Some(g) = &case.guard {
                        c.load(g);
                    }
                    let usage = c.finish();
                    let body = self.block(&case.body, false)?;
                    cases.push(StatementIR {
                        point: cpoint,
                        loc: cloc,
                        end_loc: None,
                        label: L::Case,
                        exprs: vec![usage],
                        body: Body::Block(body),
                    });
                }
                StatementIR {
                    point,
                    loc,
                    end_loc: Some(end_loc),
                    label: L::Match,
                    exprs: vec![subject],
                    body: Body::Match { cases },
                }
            }
        };
        let _ = container;
        Ok(ir)
    }

    fn opaque(&self, point: u32, loc: usize, name: &str, rhs: Collector<'s>) -> StatementIR {
        let loc = self.keyword_line_forward(loc);
        let mut lhs = self.collector();
        lhs.def(name.to_string());
        self.simple(point, loc, L::Assign, vec![lhs.finish(), rhs.finish()])
    }

    #[allow(clippy::too_many_arguments)]
    fn looping(
        &mut self,
        point: u32,
        loc: usize,
        end_loc: usize,
        label: L,
        exprs: Vec<ExprUsage>,
        body: &[Stmt],
        orelse: &[Stmt],
    ) -> Result<StatementIR> {
        let body = self.block(body, false)?;
        let orelse = if orelse.is_empty() {
            None
        } else {
            Some(Box::new(self.clause(L::Else, "else", orelse)?))
        };
        Ok(StatementIR {
            point,
            loc,
            end_loc: Some(end_loc),
            label,
            exprs,
            body: Body::Loop { body, orelse },
        })
    }

    fn with(
        &mut self,
        point: u32,
        loc: usize,
        end_loc: usize,
        items: &[ast::WithItem],
        body: &[Stmt],
    ) -> Result<StatementIR> {
        let exprs = items
            .iter()
            .map(|item| {
                let mut c = self.collector();
                if let Some(v) = &item.optional_vars {
                    c.store(v);
                }
                c.load(&item.context_expr);
                c.finish()
            })
            .collect();
        Ok(StatementIR {
            point,
            loc,
            end_loc: Some(end_loc),
            label: L::With,
            exprs,
            body: Body::Block(self.block(body, false)?),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn try_stmt(
        &mut self,
        point: u32,
        loc: usize,
        end_loc: usize,
        body: &[Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[Stmt],
        finalbody: &[Stmt],
    ) -> Result<StatementIR> {
        let body = self.block(body, false)?;
        let mut hs = Vec::with_capacity(handlers.len());
        for ast::ExceptHandler::ExceptHandler(h) in handlers {
            let hpoint = self.alloc();
            let hloc = self.line_of(h.range.start());
            let mut c = self.collector();
            if let Some(n) = &h.name {
                c.def(n.to_string());
            }
            if let Some(t) = &h.type_ {
                c.load(t);
            }
            let usage = c.finish();
            hs.push(StatementIR {
                point: hpoint,
                loc: hloc,
                end_loc: None,
                label: L::Except,
                exprs: vec![usage],
                body: Body::Block(self.block(&h.body, false)?),
            });
        }
        let orelse = if orelse.is_empty() {
            None
        } else {
            Some(Box::new(self.clause(L::Else, "else", orelse)?))
        };
        let finalbody = if finalbody.is_empty() {
            None
        } else {
            Some(Box::new(self.clause(L::Finally, "finally", finalbody)?))
        };
        Ok(StatementIR {
            point,
            loc,
            end_loc: Some(end_loc),
            label: L::Try,
            exprs: vec![],
            body: Body::Try {
                body,
                handlers: hs,
                orelse,
                finalbody,
            },
        })
    }
}

fn defaults(c: &mut Collector<'_>, args: &ast::Arguments) {
    for a in args
        .posonlyargs
        .iter()
        .chain(&args.args)
        .chain(&args.kwonlyargs)
    {
        if let Some(d) = &a.default {
            c.load(d);
        }
    }
}

fn unsupported(construct: &str, line: usize) -> FrontendError {
    FrontendError::Unsupported {
        construct: construct.to_string(),
        line,
    }
}
