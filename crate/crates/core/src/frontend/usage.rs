use std::collections::BTreeSet;

use rustpython_parser::ast::{self, Constant, Expr, Ranged, UnaryOp};

use super::ExprUsage;

/// Def/use/call facts of a single expression in load position.
pub fn extract_usage(expr: &Expr, source: &str) -> ExprUsage {
    let mut c = Collector::new(source);
    c.load(expr);
    c.finish()
}

pub(crate) struct Collector<'s> {
    source: &'s str,
    defs: BTreeSet<String>,
    uses: BTreeSet<String>,
    calls: BTreeSet<String>,
}

pub(crate) fn dotted(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => dotted(&a.value).map(|p| format!("{p}.{}", a.attr)),
        _ => None,
    }
}

fn root_of(path: &str) -> &str {
    path.split('.').next().unwrap_or(path)
}

impl<'s> Collector<'s> {
    pub(crate) fn new(source: &'s str) -> Self {
        Self {
            source,
            defs: BTreeSet::new(),
            uses: BTreeSet::new(),
            calls: BTreeSet::new(),
        }
    }

    pub(crate) fn finish(mut self) -> ExprUsage {
        self.uses.retain(|u| !self.defs.contains(u));
        ExprUsage {
            defs: self.defs,
            uses: self.uses,
            calls: self.calls,
        }
    }

    pub(crate) fn def(&mut self, name: impl Into<String>) {
        self.defs.insert(name.into());
    }

    fn text(&self, expr: &Expr) -> String {
        let r = expr.range();
        let (a, b) = (u32::from(r.start()) as usize, u32::from(r.end()) as usize);
        self.source
            .get(a..b)
            .unwrap_or_default()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Literal call arguments are kept as their source token.
    fn literal_token(&self, expr: &Expr) -> Option<String> {
        match expr {
            Expr::Constant(_) => Some(self.text(expr)),
            Expr::UnaryOp(u)
                if matches!(u.op, UnaryOp::USub | UnaryOp::UAdd)
                    && matches!(
                        &*u.operand,
                        Expr::Constant(ast::ExprConstant {
                            value: Constant::Int(_) | Constant::Float(_) | Constant::Complex { .. },
                            ..
                        })
                    ) =>
            {
                Some(self.text(expr).replace(' ', ""))
            }
            _ => None,
        }
    }

    fn argument(&mut self, expr: &Expr) {
        match self.literal_token(expr) {
            Some(tok) => {
                self.uses.insert(tok);
            }
            None => self.load(expr),
        }
    }

    fn arguments(&mut self, args: &ast::Arguments) {
        for a in args
            .posonlyargs
            .iter()
            .chain(&args.args)
            .chain(&args.kwonlyargs)
        {
            if let Some(d) = &a.default {
                self.load(d);
            }
        }
    }

    pub(crate) fn load(&mut self, expr: &Expr) {
        match expr {
            Expr::Name(n) => {
                self.uses.insert(n.id.to_string());
            }
            Expr::Constant(_) => {}
            Expr::Attribute(a) => match dotted(expr) {
                Some(path) => {
                    self.uses.insert(root_of(&path).to_string());
                    self.uses.insert(path);
                }
                None => self.load(&a.value),
            },
            Expr::Call(c) => {
                self.callee(&c.func);
                for a in &c.args {
                    self.argument(a);
                }
                for k in &c.keywords {
                    self.argument(&k.value);
                }
            }
            Expr::BoolOp(b) => b.values.iter().for_each(|v| self.load(v)),
            Expr::NamedExpr(n) => {
                self.store(&n.target);
                self.load(&n.value);
            }
            Expr::BinOp(b) => {
                self.load(&b.left);
                self.load(&b.right);
            }
            Expr::UnaryOp(u) => self.load(&u.operand),
            Expr::Lambda(l) => {
                self.arguments(&l.args);
                self.load(&l.body);
            }
            Expr::IfExp(i) => {
                self.load(&i.test);
                self.load(&i.body);
                self.load(&i.orelse);
            }
            Expr::Dict(d) => {
                for k in d.keys.iter().flatten() {
                    self.load(k);
                }
                d.values.iter().for_each(|v| self.load(v));
            }
            Expr::Set(s) => s.elts.iter().for_each(|e| self.load(e)),
            Expr::List(l) => l.elts.iter().for_each(|e| self.load(e)),
            Expr::Tuple(t) => t.elts.iter().for_each(|e| self.load(e)),
            Expr::ListComp(c) => {
                self.load(&c.elt);
                self.generators(&c.generators);
            }
            Expr::SetComp(c) => {
                self.load(&c.elt);
                self.generators(&c.generators);
            }
            Expr::GeneratorExp(c) => {
                self.load(&c.elt);
                self.generators(&c.generators);
            }
            Expr::DictComp(c) => {
                self.load(&c.key);
                self.load(&c.value);
                self.generators(&c.generators);
            }
            Expr::Await(a) => self.load(&a.value),
            Expr::Yield(y) => {
                if let Some(v) = &y.value {
                    self.load(v);
                }
            }
            Expr::YieldFrom(y) => self.load(&y.value),
            Expr::Compare(c) => {
                self.load(&c.left);
                c.comparators.iter().for_each(|e| self.load(e));
            }
            Expr::FormattedValue(f) => {
                self.load(&f.value);
                if let Some(s) = &f.format_spec {
                    self.load(s);
                }
            }
            Expr::JoinedStr(j) => j.values.iter().for_each(|v| self.load(v)),
            Expr::Subscript(s) => {
                self.load(&s.value);
                self.load(&s.slice);
            }
            Expr::Starred(s) => self.load(&s.value),
            Expr::Slice(s) => {
                for part in [&s.lower, &s.upper, &s.step].into_iter().flatten() {
                    self.load(part);
                }
            }
        }
    }

    fn generators(&mut self, gens: &[ast::Comprehension]) {
        for g in gens {
            self.load(&g.iter);
            g.ifs.iter().for_each(|e| self.load(e));
        }
    }

    fn callee(&mut self, func: &Expr) {
        match func {
            Expr::Name(n) => {
                self.calls.insert(n.id.to_string());
            }
            Expr::Attribute(a) => {
                self.calls.insert(format!(".{}", a.attr));
                match dotted(func) {
                    Some(path) => {
                        self.calls.insert(path);
                        if let Some(receiver) = dotted(&a.value) {
                            self.uses.insert(root_of(&receiver).to_string());
                            self.uses.insert(receiver);
                        }
                    }
                    None => self.load(&a.value),
                }
            }
            other => self.load(other),
        }
    }

    pub(crate) fn store(&mut self, target: &Expr) {
        match target {
            Expr::Name(n) => {
                self.defs.insert(n.id.to_string());
            }
            Expr::Attribute(a) => match dotted(target) {
                Some(path) => {
                    self.defs.insert(path);
                }
                None => self.load(&a.value),
            },
            Expr::Subscript(s) => {
                match dotted(&s.value) {
                    Some(path) => {
                        self.defs.insert(path);
                    }
                    None => self.load(&s.value),
                }
                self.load(&s.slice);
            }
            Expr::Tuple(t) => t.elts.iter().for_each(|e| self.store(e)),
            Expr::List(l) => l.elts.iter().for_each(|e| self.store(e)),
            Expr::Starred(s) => self.store(&s.value),
            other => self.load(other),
        }
    }

    pub(crate) fn pattern(&mut self, p: &ast::Pattern) {
        use ast::Pattern as P;
        match p {
            P::MatchValue(v) => self.load(&v.value),
            P::MatchSingleton(_) => {}
            P::MatchSequence(s) => s.patterns.iter().for_each(|q| self.pattern(q)),
            P::MatchMapping(m) => {
                m.keys.iter().for_each(|k| self.load(k));
                m.patterns.iter().for_each(|q| self.pattern(q));
                if let Some(r) = &m.rest {
                    self.def(r.to_string());
                }
            }
            P::MatchClass(c) => {
                self.load(&c.cls);
                c.patterns.iter().for_each(|q| self.pattern(q));
                c.kwd_patterns.iter().for_each(|q| self.pattern(q));
            }
            P::MatchStar(s) => {
                if let Some(n) = &s.name {
                    self.def(n.to_string());
                }
            }
            P::MatchAs(a) => {
                if let Some(q) = &a.pattern {
                    self.pattern(q);
                }
                if let Some(n) = &a.name {
                    self.def(n.to_string());
                }
            }
            P::MatchOr(o) => o.patterns.iter().for_each(|q| self.pattern(q)),
        }
    }
}
