//! Interpreter for advice code, utilities and merge functions.

mod value;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::frontend::StatementLabel;
use crate::sable::{
    AspectType, BinOp, CmpOp, Expr, ExprKind, FunctionDef, MergeDef, Stmt, StmtKind, Target,
    TraversalDef, UnaryOp, BUILTINS, PRIMITIVES,
};
use crate::scfg::{Scfg, StateId};
use crate::value::AspectValue;

pub use value::Value;

pub type TraversalMap = BTreeMap<String, AspectValue>;
pub type StateAnnotation = BTreeMap<String, AspectValue>;

pub const DEFAULT_MAX_DEPTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("advice line {line}: {message}")]
    Eval { line: usize, message: String },
    #[error("advice line {line}: {kind}: {message}")]
    Raised {
        line: usize,
        kind: String,
        message: String,
    },
    #[error("aspect `{aspect}` = {value} does not satisfy the type {expected}")]
    AspectType {
        aspect: String,
        value: String,
        expected: AspectType,
    },
    #[error("pointcut({label}) expects {expected} expression(s) but the state has {found}")]
    Arity {
        label: StatementLabel,
        expected: usize,
        found: usize,
    },
}

type R<T> = Result<T, RuntimeError>;

fn fail<T>(line: usize, message: impl Into<String>) -> R<T> {
    Err(RuntimeError::Eval {
        line,
        message: message.into(),
    })
}

/// Read-only environment of one weave.
pub struct Host<'a> {
    pub scfg: &'a Scfg,
    pub traversal: &'a TraversalDef,
    /// Entry of the source annotation for the analyzed procedure.
    pub source: Option<&'a BTreeMap<String, Vec<String>>>,
    pub annotations: &'a [StateAnnotation],
    pub enter_loop: &'a [bool],
    pub max_depth: usize,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum FrameKind {
    Pointcut,
    Utility,
    Merge,
}

struct Frame {
    kind: FrameKind,
    vars: HashMap<String, Value>,
}

enum Flow {
    Normal,
    Return(Value),
}

pub struct Interpreter<'a> {
    host: Host<'a>,
    frames: Vec<Frame>,
    current: Option<StateId>,
}

impl<'a> Interpreter<'a> {
    pub fn new(host: Host<'a>) -> Self {
        Interpreter {
            host,
            frames: Vec::new(),
            current: None,
        }
    }

    /// Runs the pointcut matching the state's label, if any, updating `map`.
    pub fn weave(&mut self, state: StateId, map: &mut TraversalMap) -> R<bool> {
        let st = self.host.scfg.state(state);
        let Some(pc) = self.host.traversal.pointcut(st.label) else {
            return Ok(false);
        };
        if pc.params.len() != st.exprs.len() {
            return Err(RuntimeError::Arity {
                label: st.label,
                expected: pc.params.len(),
                found: st.exprs.len(),
            });
        }
        let mut vars = HashMap::new();
        for (p, e) in pc.params.iter().zip(&st.exprs) {
            vars.insert(p.clone(), Value::Expr(Rc::new(e.clone())));
        }
        let trav = self.host.traversal;
        for a in &trav.aspects {
            let v = map.get(&a.name).map(Value::thaw).unwrap_or(Value::None);
            vars.insert(a.name.clone(), v);
        }
        for a in trav.imported_aspects() {
            vars.insert(a.clone(), Value::AspectRef(Rc::from(a.as_str())));
        }
        self.current = Some(state);
        self.frames.push(Frame {
            kind: FrameKind::Pointcut,
            vars,
        });
        let result = self.block(&pc.body);
        let frame = self.frames.pop().expect("pointcut frame");
        self.current = None;
        result?;
        for a in &trav.aspects {
            let v = frame.vars.get(&a.name).cloned().unwrap_or(Value::None);
            let frozen = v.freeze().filter(|f| a.ty.admits(f));
            match frozen {
                Some(f) => {
                    map.insert(a.name.clone(), f);
                }
                None => {
                    return Err(RuntimeError::AspectType {
                        aspect: a.name.clone(),
                        value: v.to_string(),
                        expected: a.ty,
                    })
                }
            }
        }
        Ok(true)
    }

    /// Applies a custom merge function to two maps.
    pub fn merge(&mut self, m: &MergeDef, a: &TraversalMap, b: &TraversalMap) -> R<TraversalMap> {
        let to_value = |t: &TraversalMap| {
            Value::map(
                t.iter()
                    .map(|(k, v)| (AspectValue::Str(k.clone()), Value::thaw(v)))
                    .collect(),
            )
        };
        let mut vars = HashMap::new();
        vars.insert(m.params.0.clone(), to_value(a));
        vars.insert(m.params.1.clone(), to_value(b));
        self.frames.push(Frame {
            kind: FrameKind::Merge,
            vars,
        });
        let flow = self.block(&m.body);
        self.frames.pop();
        let Flow::Return(v) = flow? else {
            return fail(m.line, "mergeAspects must return a map");
        };
        match v.freeze() {
            Some(AspectValue::Map(out)) => out
                .into_iter()
                .map(|(k, v)| match k {
                    AspectValue::Str(k) => Ok((k, v)),
                    other => fail(
                        m.line,
                        format!("mergeAspects returned non-string key {other}"),
                    ),
                })
                .collect(),
            _ => fail(
                m.line,
                format!("mergeAspects must return a map, got {}", v.type_name()),
            ),
        }
    }

    fn frame(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("active frame")
    }

    fn is_aspect_name(&self, name: &str) -> bool {
        let t = self.host.traversal;
        t.aspect_type(name).is_some()
            || t.imports
                .iter()
                .any(|i| i.aspects.iter().any(|a| a == name))
    }

    fn lookup(&self, name: &str, line: usize) -> R<Value> {
        let top = self.frames.last().expect("active frame");
        if let Some(v) = top.vars.get(name) {
            return Ok(v.clone());
        }
        if top.kind == FrameKind::Utility && self.is_aspect_name(name) {
            if let Some(v) = self.frames.first().and_then(|f| f.vars.get(name)) {
                return Ok(v.clone());
            }
            if let Some(imp) = self
                .host
                .traversal
                .imported_aspects()
                .into_iter()
                .find(|a| a == name)
            {
                return Ok(Value::AspectRef(Rc::from(imp.as_str())));
            }
        }
        let t = self.host.traversal;
        if t.annotation.as_ref().is_some_and(|a| a.var == name) {
            return Ok(Value::Annotation);
        }
        if t.utility(name).is_some() {
            return Ok(Value::Func(Rc::from(name)));
        }
        if name == "currentPoint" {
            let in_pointcut = self
                .frames
                .first()
                .is_some_and(|f| f.kind == FrameKind::Pointcut);
            return match (in_pointcut, self.current) {
                (true, Some(s)) => Ok(Value::State(s)),
                _ => fail(line, "currentPoint is only available in a pointcut"),
            };
        }
        if let Some(b) = BUILTINS.iter().chain(PRIMITIVES).find(|b| **b == name) {
            return Ok(Value::Builtin(b));
        }
        if top.kind == FrameKind::Pointcut && self.is_aspect_name(name) {
            return Ok(Value::None);
        }
        fail(line, format!("name `{name}` is not defined"))
    }

    fn block(&mut self, body: &[Stmt]) -> R<Flow> {
        for s in body {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt) -> R<Flow> {
        let line = s.line;
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let v = self.eval(value)?;
                self.assign(target, v, line)?;
            }
            StmtKind::AugAssign { target, op, value } => {
                let rhs = self.eval(value)?;
                match target {
                    Target::Name(n) => {
                        let cur = self.lookup(n, line)?;
                        let v = self.aug(*op, cur, rhs, line)?;
                        self.frame().vars.insert(n.clone(), v);
                    }
                    Target::Subscript(obj, idx) => {
                        let obj = self.eval(obj)?;
                        let idx = self.eval(idx)?;
                        let cur = self.subscript(&obj, &idx, line)?;
                        let v = self.aug(*op, cur, rhs, line)?;
                        self.set_item(&obj, idx, v, line)?;
                    }
                    Target::Tuple(_) => return fail(line, "invalid augmented assignment target"),
                }
            }
            StmtKind::If { branches, orelse } => {
                for (cond, body) in branches {
                    let c = self.eval(cond)?;
                    if truth(&c, cond.line)? {
                        return self.block(body);
                    }
                }
                return self.block(orelse);
            }
            StmtKind::For { target, iter, body } => {
                let it = self.eval(iter)?;
                for item in iterate(&it, line)? {
                    self.assign(target, item, line)?;
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Raise(e) => {
                let (kind, message) = match e {
                    Some(e) => match self.eval(e)? {
                        Value::Exception(k, m) => (k.to_string(), m.to_string()),
                        Value::Builtin(b) if b.ends_with("Error") || b == "Exception" => {
                            (b.to_string(), String::new())
                        }
                        other => (String::from("Exception"), other.to_py_str()),
                    },
                    None => (
                        "RuntimeError".into(),
                        "No active exception to reraise".into(),
                    ),
                };
                return Err(RuntimeError::Raised {
                    line,
                    kind,
                    message,
                });
            }
            StmtKind::Pass => {}
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn assign(&mut self, target: &Target, v: Value, line: usize) -> R<()> {
        match target {
            Target::Name(n) => {
                self.frame().vars.insert(n.clone(), v);
            }
            Target::Subscript(obj, idx) => {
                let obj = self.eval(obj)?;
                let idx = self.eval(idx)?;
                self.set_item(&obj, idx, v, line)?;
            }
            Target::Tuple(ts) => {
                let items = iterate(&v, line)?;
                if items.len() != ts.len() {
                    return fail(
                        line,
                        format!(
                            "cannot unpack {} values into {} targets",
                            items.len(),
                            ts.len()
                        ),
                    );
                }
                for (t, item) in ts.iter().zip(items) {
                    self.assign(t, item, line)?;
                }
            }
        }
        Ok(())
    }

    fn set_item(&mut self, obj: &Value, idx: Value, v: Value, line: usize) -> R<()> {
        match obj {
            Value::List(l) => {
                let mut l = l.borrow_mut();
                let i = index(&idx, l.len(), line)?;
                l[i] = v;
            }
            Value::Map(m) => {
                let k = key(&idx, line)?;
                m.borrow_mut().insert(k, v);
            }
            other => {
                return fail(
                    line,
                    format!("'{}' does not support item assignment", other.type_name()),
                )
            }
        }
        Ok(())
    }

    /// In-place for sets and lists, rebinding otherwise.
    fn aug(&mut self, op: BinOp, cur: Value, rhs: Value, line: usize) -> R<Value> {
        match (&cur, op, &rhs) {
            (
                Value::Set(a),
                BinOp::BitOr | BinOp::BitAnd | BinOp::Sub | BinOp::BitXor,
                Value::Set(b),
            ) => {
                let b = b.borrow().clone();
                let mut a_mut = a.borrow_mut();
                let next: BTreeSet<AspectValue> = match op {
                    BinOp::BitOr => a_mut.union(&b).cloned().collect(),
                    BinOp::BitAnd => a_mut.intersection(&b).cloned().collect(),
                    BinOp::Sub => a_mut.difference(&b).cloned().collect(),
                    _ => a_mut.symmetric_difference(&b).cloned().collect(),
                };
                *a_mut = next;
                drop(a_mut);
                Ok(cur)
            }
            (Value::List(a), BinOp::Add, _) => {
                let items = iterate(&rhs, line)?;
                a.borrow_mut().extend(items);
                Ok(cur)
            }
            _ => binop(op, &cur, &rhs, line),
        }
    }

    fn eval(&mut self, e: &Expr) -> R<Value> {
        let line = e.line;
        Ok(match &e.kind {
            ExprKind::Name(n) => self.lookup(n, line)?,
            ExprKind::Lit(v) => Value::thaw(v),
            ExprKind::List(xs) => Value::list(self.eval_all(xs)?),
            ExprKind::Tuple(xs) => Value::Tuple(Rc::new(self.eval_all(xs)?)),
            ExprKind::Set(xs) => {
                let mut s = BTreeSet::new();
                for x in xs {
                    let v = self.eval(x)?;
                    s.insert(key(&v, line)?);
                }
                Value::set(s)
            }
            ExprKind::Dict(pairs) => {
                let mut m = BTreeMap::new();
                for (k, v) in pairs {
                    let k = self.eval(k)?;
                    let v = self.eval(v)?;
                    m.insert(key(&k, line)?, v);
                }
                Value::map(m)
            }
            ExprKind::Bin(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                binop(*op, &a, &b, line)?
            }
            ExprKind::Unary(UnaryOp::Not, a) => {
                let v = self.eval(a)?;
                Value::Bool(!truth(&v, line)?)
            }
            ExprKind::Unary(UnaryOp::Neg, a) => match self.eval(a)? {
                Value::Int(i) => Value::Int(i.checked_neg().ok_or_else(|| overflow(line))?),
                other => {
                    return fail(
                        line,
                        format!("bad operand type for unary -: '{}'", other.type_name()),
                    )
                }
            },
            ExprKind::And(a, b) => {
                let l = self.eval(a)?;
                if truth(&l, line)? {
                    self.eval(b)?
                } else {
                    l
                }
            }
            ExprKind::Or(a, b) => {
                let l = self.eval(a)?;
                if truth(&l, line)? {
                    l
                } else {
                    self.eval(b)?
                }
            }
            ExprKind::Compare(first, rest) => {
                let mut left = self.eval(first)?;
                for (op, x) in rest {
                    let right = self.eval(x)?;
                    if !compare(*op, &left, &right, line)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            ExprKind::IfExp { cond, then, orelse } => {
                let c = self.eval(cond)?;
                if truth(&c, line)? {
                    self.eval(then)?
                } else {
                    self.eval(orelse)?
                }
            }
            ExprKind::Subscript(v, i) => {
                let v = self.eval(v)?;
                let i = self.eval(i)?;
                self.subscript(&v, &i, line)?
            }
            ExprKind::Call(f, args) => {
                let f = self.eval(f)?;
                let args = self.eval_all(args)?;
                self.call(f, args, line)?
            }
            ExprKind::Method(recv, name, args) => {
                let recv = self.eval(recv)?;
                let args = self.eval_all(args)?;
                method(&recv, name, args, line)?
            }
        })
    }

    fn eval_all(&mut self, xs: &[Expr]) -> R<Vec<Value>> {
        xs.iter().map(|x| self.eval(x)).collect()
    }

    fn subscript(&self, v: &Value, i: &Value, line: usize) -> R<Value> {
        match v {
            Value::List(l) => {
                let l = l.borrow();
                Ok(l[index(i, l.len(), line)?].clone())
            }
            Value::Tuple(t) => Ok(t[index(i, t.len(), line)?].clone()),
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                Ok(Value::str(&chars[index(i, chars.len(), line)?].to_string()))
            }
            Value::Map(m) => {
                let k = key(i, line)?;
                match m.borrow().get(&k) {
                    Some(v) => Ok(v.clone()),
                    None => Err(RuntimeError::Raised {
                        line,
                        kind: "KeyError".into(),
                        message: k.to_string(),
                    }),
                }
            }
            Value::None => fail(line, "None used in an operator (uninitialized aspect?)"),
            other => fail(
                line,
                format!("'{}' object is not subscriptable", other.type_name()),
            ),
        }
    }

    fn call(&mut self, f: Value, args: Vec<Value>, line: usize) -> R<Value> {
        match f {
            Value::Func(name) => {
                let def = self
                    .host
                    .traversal
                    .utility(&name)
                    .expect("validated utility name");
                self.call_utility(def, args, line)
            }
            Value::Builtin(b) => self.builtin(b, args, line),
            other => fail(
                line,
                format!("'{}' object is not callable", other.type_name()),
            ),
        }
    }

    fn call_utility(&mut self, def: &FunctionDef, args: Vec<Value>, line: usize) -> R<Value> {
        if args.len() != def.params.len() {
            return fail(
                line,
                format!(
                    "{}() takes {} argument(s) but {} were given",
                    def.name,
                    def.params.len(),
                    args.len()
                ),
            );
        }
        if self.frames.len() > self.host.max_depth {
            return fail(line, format!("call depth exceeds {}", self.host.max_depth));
        }
        let vars = def.params.iter().cloned().zip(args).collect();
        self.frames.push(Frame {
            kind: FrameKind::Utility,
            vars,
        });
        let flow = self.block(&def.body);
        self.frames.pop();
        Ok(match flow? {
            Flow::Return(v) => v,
            Flow::Normal => Value::None,
        })
    }

    fn builtin(&mut self, name: &'static str, args: Vec<Value>, line: usize) -> R<Value> {
        let argc = |n: usize| -> R<()> {
            if args.len() == n {
                Ok(())
            } else {
                fail(
                    line,
                    format!(
                        "{name}() takes {n} argument(s) but {} were given",
                        args.len()
                    ),
                )
            }
        };
        let opt = |max: usize| -> R<()> {
            if args.len() <= max {
                Ok(())
            } else {
                fail(line, format!("{name}() takes at most {max} argument(s)"))
            }
        };
        Ok(match name {
            "len" => {
                argc(1)?;
                let n = match &args[0] {
                    Value::Set(s) => s.borrow().len(),
                    Value::List(l) => l.borrow().len(),
                    Value::Map(m) => m.borrow().len(),
                    Value::Tuple(t) => t.len(),
                    Value::Str(s) => s.chars().count(),
                    Value::None => {
                        return fail(line, "None used in an operator (uninitialized aspect?)")
                    }
                    other => {
                        return fail(
                            line,
                            format!("object of type '{}' has no len()", other.type_name()),
                        )
                    }
                };
                Value::Int(n as i64)
            }
            "set" => {
                opt(1)?;
                let mut s = BTreeSet::new();
                if let Some(a) = args.first() {
                    for v in iterate(a, line)? {
                        s.insert(key(&v, line)?);
                    }
                }
                Value::set(s)
            }
            "list" | "sorted" => {
                opt(1)?;
                let mut items = match args.first() {
                    Some(a) => iterate(a, line)?,
                    None => vec![],
                };
                if name == "sorted" {
                    let mut keyed = items
                        .into_iter()
                        .map(|v| key(&v, line).map(|k| (k, v)))
                        .collect::<R<Vec<_>>>()?;
                    keyed.sort_by(|a, b| a.0.cmp(&b.0));
                    items = keyed.into_iter().map(|(_, v)| v).collect();
                }
                Value::list(items)
            }
            "dict" => {
                opt(1)?;
                match args.first() {
                    None => Value::map(BTreeMap::new()),
                    Some(Value::Map(m)) => Value::map(m.borrow().clone()),
                    Some(other) => {
                        let mut m = BTreeMap::new();
                        for pair in iterate(other, line)? {
                            let kv = iterate(&pair, line)?;
                            if kv.len() != 2 {
                                return fail(line, "dict() expects key/value pairs");
                            }
                            m.insert(key(&kv[0], line)?, kv[1].clone());
                        }
                        Value::map(m)
                    }
                }
            }
            "str" => {
                opt(1)?;
                Value::str(&args.first().map(Value::to_py_str).unwrap_or_default())
            }
            "int" => {
                argc(1)?;
                match &args[0] {
                    Value::Int(i) => Value::Int(*i),
                    Value::Bool(b) => Value::Int(*b as i64),
                    Value::Str(s) => match s.trim().parse::<i64>() {
                        Ok(i) => Value::Int(i),
                        Err(_) => {
                            return Err(RuntimeError::Raised {
                                line,
                                kind: "ValueError".into(),
                                message: format!("invalid literal for int(): {:?}", s.as_ref()),
                            })
                        }
                    },
                    other => {
                        return fail(
                            line,
                            format!(
                                "int() argument must be a string or a number, not '{}'",
                                other.type_name()
                            ),
                        )
                    }
                }
            }
            "bool" => {
                argc(1)?;
                match &args[0] {
                    Value::Bool(b) => Value::Bool(*b),
                    Value::Int(i) => Value::Bool(*i != 0),
                    other => {
                        return fail(
                            line,
                            format!(
                                "bool() of '{}' is not allowed; compare explicitly",
                                other.type_name()
                            ),
                        )
                    }
                }
            }
            "deepcopy" => {
                argc(1)?;
                args[0].deep_copy()
            }
            "type" => {
                argc(1)?;
                match args[0].type_name() {
                    "bool" => Value::Builtin("bool"),
                    "int" => Value::Builtin("int"),
                    "str" => Value::Builtin("str"),
                    "set" => Value::Builtin("set"),
                    "list" => Value::Builtin("list"),
                    "dict" => Value::Builtin("dict"),
                    other => Value::str(other),
                }
            }
            "ValueError" | "TypeError" | "RuntimeError" | "Exception" => {
                opt(1)?;
                Value::Exception(
                    Rc::from(name),
                    Rc::from(
                        args.first()
                            .map(Value::to_py_str)
                            .unwrap_or_default()
                            .as_str(),
                    ),
                )
            }
            "currentPoint" => return fail(line, "currentPoint is not callable"),
            "getAspect" => {
                argc(2)?;
                let Value::State(s) = args[0] else {
                    return fail(
                        line,
                        format!("getAspect expects a state, got {}", args[0].type_name()),
                    );
                };
                let aspect = match &args[1] {
                    Value::AspectRef(a) => a.to_string(),
                    Value::Str(a) => a.to_string(),
                    other => {
                        return fail(
                            line,
                            format!(
                                "getAspect expects an imported aspect, got {}",
                                other.type_name()
                            ),
                        )
                    }
                };
                if !self.host.traversal.imported_aspects().contains(&aspect) {
                    return fail(
                        line,
                        format!("aspect `{aspect}` is not imported by this traversal"),
                    );
                }
                match self.host.annotations.get(s).and_then(|a| a.get(&aspect)) {
                    Some(v) => Value::thaw(v),
                    None => {
                        let st = self.host.scfg.state(s);
                        return fail(
                            line,
                            format!("aspect `{aspect}` is not annotated on state {}", st.name()),
                        );
                    }
                }
            }
            "enterLoop" => {
                argc(1)?;
                let Value::State(s) = args[0] else {
                    return fail(
                        line,
                        format!("enterLoop expects a state, got {}", args[0].type_name()),
                    );
                };
                Value::Bool(
                    self.host.scfg.state(s).label.is_loop()
                        && self.host.enter_loop.get(s).copied().unwrap_or(false),
                )
            }
            "getExprSymbs" => {
                argc(2)?;
                let Value::Str(label) = &args[0] else {
                    return fail(line, "getExprSymbs expects a symbol label string");
                };
                let Value::Expr(e) = &args[1] else {
                    return fail(
                        line,
                        format!(
                            "getExprSymbs expects an expression, got {}",
                            args[1].type_name()
                        ),
                    );
                };
                let names: BTreeSet<&String> = match label.as_ref() {
                    "def" => e.defs.iter().collect(),
                    "use" => e.uses.iter().collect(),
                    "call" => e.calls.iter().collect(),
                    "all" => e.defs.iter().chain(&e.uses).chain(&e.calls).collect(),
                    other => return fail(line, format!("unknown symbol label '{other}' (expected 'def', 'use', 'call' or 'all')")),
                };
                Value::set(
                    names
                        .into_iter()
                        .map(|n| AspectValue::Str(n.clone()))
                        .collect(),
                )
            }
            "getDescrSymbs" => {
                argc(2)?;
                let Value::Str(label) = &args[0] else {
                    return fail(line, "getDescrSymbs expects a symbol label string");
                };
                if !matches!(args[1], Value::Annotation) {
                    return fail(
                        line,
                        format!(
                            "getDescrSymbs expects the source annotation, got {}",
                            args[1].type_name()
                        ),
                    );
                }
                let Some(entry) = self.host.source else {
                    return fail(
                        line,
                        "no source annotation entry for the analyzed procedure",
                    );
                };
                match entry.get(label.as_ref()) {
                    Some(symbols) => Value::set(
                        symbols
                            .iter()
                            .map(|s| AspectValue::Str(s.clone()))
                            .collect(),
                    ),
                    None => {
                        return fail(
                            line,
                            format!("label '{label}' is not in the source annotation"),
                        )
                    }
                }
            }
            other => return fail(line, format!("unknown builtin `{other}`")),
        })
    }
}

fn overflow(line: usize) -> RuntimeError {
    RuntimeError::Eval {
        line,
        message: "integer overflow".into(),
    }
}

fn truth(v: &Value, line: usize) -> R<bool> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => fail(
            line,
            format!(
                "condition must be a bool, got {} ({other})",
                other.type_name()
            ),
        ),
    }
}

fn key(v: &Value, line: usize) -> R<AspectValue> {
    match v {
        Value::List(_) | Value::Set(_) | Value::Map(_) => {
            fail(line, format!("unhashable type: '{}'", v.type_name()))
        }
        _ => v.freeze().ok_or_else(|| RuntimeError::Eval {
            line,
            message: format!("cannot store a {} in a collection", v.type_name()),
        }),
    }
}

fn index(i: &Value, len: usize, line: usize) -> R<usize> {
    let Value::Int(i) = i else {
        return fail(
            line,
            format!("indices must be integers, not {}", i.type_name()),
        );
    };
    let idx = if *i < 0 { len as i64 + i } else { *i };
    if idx < 0 || idx >= len as i64 {
        return Err(RuntimeError::Raised {
            line,
            kind: "IndexError".into(),
            message: "index out of range".into(),
        });
    }
    Ok(idx as usize)
}

fn iterate(v: &Value, line: usize) -> R<Vec<Value>> {
    Ok(match v {
        Value::Set(s) => s.borrow().iter().map(Value::thaw).collect(),
        Value::List(l) => l.borrow().clone(),
        Value::Tuple(t) => t.as_ref().clone(),
        Value::Map(m) => m.borrow().keys().map(Value::thaw).collect(),
        Value::Str(s) => s.chars().map(|c| Value::str(&c.to_string())).collect(),
        Value::None => return fail(line, "None used in an operator (uninitialized aspect?)"),
        other => {
            return fail(
                line,
                format!("'{}' object is not iterable", other.type_name()),
            )
        }
    })
}

fn binop(op: BinOp, a: &Value, b: &Value, line: usize) -> R<Value> {
    use Value as V;
    if matches!(a, V::None) || matches!(b, V::None) {
        return fail(
            line,
            format!(
                "None used in operator `{}` (uninitialized aspect?)",
                op.symbol()
            ),
        );
    }
    Ok(match (op, a, b) {
        (BinOp::BitOr, V::Bool(x), V::Bool(y)) => V::Bool(*x | *y),
        (BinOp::BitAnd, V::Bool(x), V::Bool(y)) => V::Bool(*x & *y),
        (BinOp::BitXor, V::Bool(x), V::Bool(y)) => V::Bool(*x ^ *y),
        (BinOp::BitOr, V::Set(x), V::Set(y)) => {
            V::set(x.borrow().union(&y.borrow()).cloned().collect())
        }
        (BinOp::BitAnd, V::Set(x), V::Set(y)) => {
            V::set(x.borrow().intersection(&y.borrow()).cloned().collect())
        }
        (BinOp::Sub, V::Set(x), V::Set(y)) => {
            V::set(x.borrow().difference(&y.borrow()).cloned().collect())
        }
        (BinOp::BitXor, V::Set(x), V::Set(y)) => V::set(
            x.borrow()
                .symmetric_difference(&y.borrow())
                .cloned()
                .collect(),
        ),
        (BinOp::BitOr, V::Map(x), V::Map(y)) => {
            let mut m = x.borrow().clone();
            m.extend(y.borrow().iter().map(|(k, v)| (k.clone(), v.clone())));
            V::map(m)
        }
        (BinOp::Add, V::Str(x), V::Str(y)) => V::str(&format!("{x}{y}")),
        (BinOp::Add, V::List(x), V::List(y)) => {
            let mut l = x.borrow().clone();
            l.extend(y.borrow().iter().cloned());
            V::list(l)
        }
        (_, V::Int(x), V::Int(y)) => {
            let (x, y) = (*x, *y);
            V::Int(match op {
                BinOp::BitOr => x | y,
                BinOp::BitAnd => x & y,
                BinOp::BitXor => x ^ y,
                BinOp::Add => x.checked_add(y).ok_or_else(|| overflow(line))?,
                BinOp::Sub => x.checked_sub(y).ok_or_else(|| overflow(line))?,
                BinOp::Mul => x.checked_mul(y).ok_or_else(|| overflow(line))?,
                BinOp::FloorDiv | BinOp::Mod if y == 0 => {
                    return Err(RuntimeError::Raised {
                        line,
                        kind: "ZeroDivisionError".into(),
                        message: "integer division or modulo by zero".into(),
                    })
                }
                BinOp::FloorDiv => {
                    x.div_euclid(y)
                        - if (x.rem_euclid(y) != 0) && (y < 0) {
                            1
                        } else {
                            0
                        }
                }
                BinOp::Mod => {
                    let r = x % y;
                    if r != 0 && ((r < 0) != (y < 0)) {
                        r + y
                    } else {
                        r
                    }
                }
            })
        }
        _ => {
            return fail(
                line,
                format!(
                    "unsupported operand type(s) for {}: '{}' and '{}'",
                    op.symbol(),
                    a.type_name(),
                    b.type_name()
                ),
            )
        }
    })
}

fn compare(op: CmpOp, a: &Value, b: &Value, line: usize) -> R<bool> {
    use Value as V;
    Ok(match op {
        CmpOp::Eq => a.py_eq(b),
        CmpOp::NotEq => !a.py_eq(b),
        CmpOp::Is => a.is(b),
        CmpOp::IsNot => !a.is(b),
        CmpOp::In | CmpOp::NotIn => {
            let found = match b {
                V::Set(s) => match a {
                    V::List(_) | V::Set(_) | V::Map(_) => false,
                    _ => a.freeze().is_some_and(|k| s.borrow().contains(&k)),
                },
                V::List(l) => l.borrow().iter().any(|x| x.py_eq(a)),
                V::Tuple(t) => t.iter().any(|x| x.py_eq(a)),
                V::Map(m) => a.freeze().is_some_and(|k| m.borrow().contains_key(&k)),
                V::Str(s) => match a {
                    V::Str(x) => s.contains(x.as_ref()),
                    other => {
                        return fail(
                            line,
                            format!(
                                "'in <string>' requires string as left operand, not {}",
                                other.type_name()
                            ),
                        )
                    }
                },
                V::None => return fail(line, "None used in operator `in` (uninitialized aspect?)"),
                other => {
                    return fail(
                        line,
                        format!("argument of type '{}' is not iterable", other.type_name()),
                    )
                }
            };
            found == (op == CmpOp::In)
        }
        CmpOp::Lt | CmpOp::LtE | CmpOp::Gt | CmpOp::GtE => {
            let ord = match (a, b) {
                (V::Int(x), V::Int(y)) => x.cmp(y),
                (V::Str(x), V::Str(y)) => x.cmp(y),
                (V::Set(x), V::Set(y)) => {
                    let (x, y) = (x.borrow(), y.borrow());
                    return Ok(match op {
                        CmpOp::LtE => x.is_subset(&y),
                        CmpOp::Lt => x.is_subset(&y) && x.len() < y.len(),
                        CmpOp::GtE => x.is_superset(&y),
                        _ => x.is_superset(&y) && x.len() > y.len(),
                    });
                }
                (V::None, _) | (_, V::None) => {
                    return fail(
                        line,
                        format!(
                            "None used in operator `{}` (uninitialized aspect?)",
                            op.symbol()
                        ),
                    )
                }
                _ => {
                    return fail(
                        line,
                        format!(
                            "'{}' not supported between '{}' and '{}'",
                            op.symbol(),
                            a.type_name(),
                            b.type_name()
                        ),
                    )
                }
            };
            match op {
                CmpOp::Lt => ord.is_lt(),
                CmpOp::LtE => ord.is_le(),
                CmpOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }
        }
    })
}

fn method(recv: &Value, name: &str, args: Vec<Value>, line: usize) -> R<Value> {
    use Value as V;
    let argc = |lo: usize, hi: usize| -> R<()> {
        if (lo..=hi).contains(&args.len()) {
            Ok(())
        } else {
            fail(line, format!("{name}() got {} argument(s)", args.len()))
        }
    };
    Ok(match (recv, name) {
        (V::List(l), "append") => {
            argc(1, 1)?;
            l.borrow_mut().push(args[0].clone());
            V::None
        }
        (V::List(l), "extend") => {
            argc(1, 1)?;
            let items = iterate(&args[0], line)?;
            l.borrow_mut().extend(items);
            V::None
        }
        (V::List(l), "pop") => {
            argc(0, 1)?;
            let mut l = l.borrow_mut();
            if l.is_empty() {
                return Err(RuntimeError::Raised {
                    line,
                    kind: "IndexError".into(),
                    message: "pop from empty list".into(),
                });
            }
            let i = index(args.first().unwrap_or(&V::Int(-1)), l.len(), line)?;
            l.remove(i)
        }
        (V::List(l), "copy") | (V::List(l), "__copy__") => {
            argc(0, 0)?;
            V::list(l.borrow().clone())
        }
        (V::List(l), "index") => {
            argc(1, 1)?;
            match l.borrow().iter().position(|x| x.py_eq(&args[0])) {
                Some(i) => V::Int(i as i64),
                None => {
                    return Err(RuntimeError::Raised {
                        line,
                        kind: "ValueError".into(),
                        message: format!("{} is not in list", args[0]),
                    })
                }
            }
        }
        (V::List(l), "count") => {
            argc(1, 1)?;
            V::Int(l.borrow().iter().filter(|x| x.py_eq(&args[0])).count() as i64)
        }
        (V::Set(s), "add") => {
            argc(1, 1)?;
            s.borrow_mut().insert(key(&args[0], line)?);
            V::None
        }
        (V::Set(s), "discard") | (V::Set(s), "remove") => {
            argc(1, 1)?;
            let k = key(&args[0], line)?;
            if !s.borrow_mut().remove(&k) && name == "remove" {
                return Err(RuntimeError::Raised {
                    line,
                    kind: "KeyError".into(),
                    message: k.to_string(),
                });
            }
            V::None
        }
        (V::Set(s), "update") => {
            argc(1, 1)?;
            for v in iterate(&args[0], line)? {
                s.borrow_mut().insert(key(&v, line)?);
            }
            V::None
        }
        (V::Set(s), "copy") => {
            argc(0, 0)?;
            V::set(s.borrow().clone())
        }
        (V::Set(_), "union" | "intersection" | "difference") => {
            argc(1, 1)?;
            let other = V::set(
                iterate(&args[0], line)?
                    .iter()
                    .map(|v| key(v, line))
                    .collect::<R<BTreeSet<_>>>()?,
            );
            let op = match name {
                "union" => BinOp::BitOr,
                "intersection" => BinOp::BitAnd,
                _ => BinOp::Sub,
            };
            binop(op, recv, &other, line)?
        }
        (V::Set(_), "issubset") => {
            argc(1, 1)?;
            V::Bool(compare(CmpOp::LtE, recv, &args[0], line)?)
        }
        (V::Map(m), "keys") => {
            argc(0, 0)?;
            V::list(m.borrow().keys().map(V::thaw).collect())
        }
        (V::Map(m), "values") => {
            argc(0, 0)?;
            V::list(m.borrow().values().cloned().collect())
        }
        (V::Map(m), "items") => {
            argc(0, 0)?;
            V::list(
                m.borrow()
                    .iter()
                    .map(|(k, v)| V::Tuple(Rc::new(vec![V::thaw(k), v.clone()])))
                    .collect(),
            )
        }
        (V::Map(m), "get") => {
            argc(1, 2)?;
            let k = key(&args[0], line)?;
            m.borrow()
                .get(&k)
                .cloned()
                .unwrap_or_else(|| args.get(1).cloned().unwrap_or(V::None))
        }
        (V::Map(m), "copy") => {
            argc(0, 0)?;
            V::map(m.borrow().clone())
        }
        (V::Str(s), "startswith") | (V::Str(s), "endswith") => {
            argc(1, 1)?;
            let V::Str(p) = &args[0] else {
                return fail(line, format!("{name}() expects a string"));
            };
            V::Bool(if name == "startswith" {
                s.starts_with(p.as_ref())
            } else {
                s.ends_with(p.as_ref())
            })
        }
        (V::Str(s), "removeprefix") | (V::Str(s), "removesuffix") => {
            argc(1, 1)?;
            let V::Str(p) = &args[0] else {
                return fail(line, format!("{name}() expects a string"));
            };
            let out = if name == "removeprefix" {
                s.strip_prefix(p.as_ref())
            } else {
                s.strip_suffix(p.as_ref())
            };
            V::str(out.unwrap_or(s))
        }
        (V::Str(s), "strip") => {
            argc(0, 0)?;
            V::str(s.trim())
        }
        (V::Str(s), "split") => {
            argc(0, 1)?;
            let parts: Vec<V> = match args.first() {
                None => s.split_whitespace().map(V::str).collect(),
                Some(V::Str(sep)) if !sep.is_empty() => s.split(sep.as_ref()).map(V::str).collect(),
                Some(_) => return fail(line, "split() expects a non-empty string separator"),
            };
            V::list(parts)
        }
        (V::Str(s), "lower") => V::str(&s.to_lowercase()),
        (V::Str(s), "upper") => V::str(&s.to_uppercase()),
        (V::None, _) => {
            return fail(
                line,
                format!("None has no method {name}() (uninitialized aspect?)"),
            )
        }
        (other, _) => {
            return fail(
                line,
                format!("'{}' object has no method '{name}'", other.type_name()),
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_procedure;
    use crate::sable::parse_sable;

    struct Fixture {
        scfg: Scfg,
        trav: TraversalDef,
        source: BTreeMap<String, Vec<String>>,
    }

    fn fixture(py: &str, sable: &str) -> Fixture {
        let scfg = Scfg::build(&parse_procedure(py, "m.py:f").unwrap()).unwrap();
        let trav = parse_sable(sable).unwrap().traversals.remove(0);
        let source = [("source".to_string(), vec!["secret".to_string()])].into();
        Fixture { scfg, trav, source }
    }

    fn run(fx: &Fixture, state: StateId, map: &mut TraversalMap) -> R<bool> {
        let annotations = vec![StateAnnotation::new(); fx.scfg.len()];
        let enter = vec![true; fx.scfg.len()];
        let mut it = Interpreter::new(Host {
            scfg: &fx.scfg,
            traversal: &fx.trav,
            source: Some(&fx.source),
            annotations: &annotations,
            enter_loop: &enter,
            max_depth: DEFAULT_MAX_DEPTH,
        });
        it.weave(state, map)
    }

    const PY: &str = "def f(a):\n    x = secret(a)\n    g(x)\n";

    #[test]
    fn enter_procedure_initialization() {
        let fx = fixture(
            PY,
            "traversal T:\n\tsourceAnnotation ann\n\taspect S aspectType set\n\taspect L aspectType list\n\taspect B aspectType bool\n\tpointcut(EnterProcedure, inputs):\n\t\tS = getDescrSymbs('source', ann)\n\t\tL = []\n\t\tB = False\n",
        );
        let mut map = TraversalMap::new();
        assert!(run(&fx, fx.scfg.start(), &mut map).unwrap());
        assert_eq!(map["S"], AspectValue::str_set(["secret"]));
        assert_eq!(map["L"], AspectValue::List(vec![]));
        assert_eq!(map["B"], AspectValue::Bool(false));
    }

    #[test]
    fn utility_mutation_is_visible_through_aliases() {
        let fx = fixture(
            PY,
            "traversal T:\n\taspect L aspectType list\n\tutility:\n\t\tdef push(expr, L):\n\t\t\tL.append(len(getExprSymbs('call', expr)) > 0)\n\tpointcut(Assign, l, r):\n\t\tpush(r, L)\n",
        );
        let mut map: TraversalMap = [("L".to_string(), AspectValue::List(vec![]))].into();
        let assign = fx.scfg.find(1, StatementLabel::Assign).unwrap();
        run(&fx, assign, &mut map).unwrap();
        assert_eq!(map["L"], AspectValue::List(vec![AspectValue::Bool(true)]));
    }

    #[test]
    fn empty_or_missing_pointcut_leaves_map() {
        let fx = fixture(
            PY,
            "traversal T:\n\taspect B aspectType bool\n\tpointcut(Exp, e): pass\n",
        );
        let mut map: TraversalMap = [("B".to_string(), AspectValue::Bool(true))].into();
        let exp = fx.scfg.find(2, StatementLabel::Exp).unwrap();
        assert!(run(&fx, exp, &mut map).unwrap());
        assert!(!run(&fx, fx.scfg.end(), &mut map).unwrap());
        assert_eq!(map["B"], AspectValue::Bool(true));
    }

    #[test]
    fn type_errors() {
        let fx = fixture(
            PY,
            "traversal T:\n\taspect S aspectType set\n\tpointcut(Exp, e): S = True\n",
        );
        let exp = fx.scfg.find(2, StatementLabel::Exp).unwrap();
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(matches!(err, RuntimeError::AspectType { .. }), "{err}");

        let fx = fixture(
            PY,
            "traversal T:\n\taspect S aspectType set\n\tpointcut(Exp, e): S = S | {1}\n",
        );
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(err.to_string().contains("None used"), "{err}");

        let fx = fixture(PY, "traversal T:\n\taspect B aspectType bool\n\tpointcut(Exp, e):\n\t\tif getExprSymbs('use', e): B = True\n");
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(
            err.to_string().contains("condition must be a bool"),
            "{err}"
        );
    }

    #[test]
    fn primitive_errors() {
        let fx = fixture(PY, "traversal T:\n\taspect S aspectType set\n\tpointcut(Exp, e): S = getExprSymbs('write', e)\n");
        let exp = fx.scfg.find(2, StatementLabel::Exp).unwrap();
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(
            err.to_string().contains("unknown symbol label 'write'"),
            "{err}"
        );

        let fx = fixture(
            PY,
            "traversal T:\n\tsourceAnnotation ann\n\taspect S aspectType set\n\tpointcut(Exp, e): S = getDescrSymbs('sanitize', ann)\n",
        );
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(
            err.to_string()
                .contains("'sanitize' is not in the source annotation"),
            "{err}"
        );

        let fx = fixture(PY, "traversal T:\n\tpointcut(Exp): pass\n");
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(matches!(
            err,
            RuntimeError::Arity {
                expected: 0,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn expression_semantics() {
        let fx = fixture(
            PY,
            "traversal T:\n\taspect M aspectType dict\n\tutility:\n\t\tdef fact(n):\n\t\t\tif n <= 1: return 1\n\t\t\treturn n * fact(n - 1)\n\tpointcut(Exp, e):\n\t\tM = {}\n\t\tM['f'] = fact(5)\n\t\tM['d'] = -7 // 2\n\t\tM['m'] = -7 % 3\n\t\tM['s'] = {1, 2} <= {1, 2, 3} and 1 not in {2}\n\t\tM['c'] = 1 < 2 < 3\n\t\tl = [1, 2, 3]\n\t\tM['p'] = l.pop() + l[-1]\n\t\tM['t'] = type(l) == list\n\t\tM['x'] = 'a' + str(3)\n",
        );
        let exp = fx.scfg.find(2, StatementLabel::Exp).unwrap();
        let mut map = TraversalMap::new();
        run(&fx, exp, &mut map).unwrap();
        let AspectValue::Map(m) = &map["M"] else {
            panic!()
        };
        let get = |k: &str| m[&AspectValue::Str(k.into())].clone();
        assert_eq!(get("f"), AspectValue::Int(120));
        assert_eq!(get("d"), AspectValue::Int(-4));
        assert_eq!(get("m"), AspectValue::Int(2));
        assert_eq!(get("s"), AspectValue::Bool(true));
        assert_eq!(get("c"), AspectValue::Bool(true));
        assert_eq!(get("p"), AspectValue::Int(5));
        assert_eq!(get("t"), AspectValue::Bool(true));
        assert_eq!(get("x"), AspectValue::Str("a3".into()));
    }

    #[test]
    fn recursion_is_capped_and_raise_surfaces() {
        let fx = fixture(
            PY,
            "traversal T:\n\tutility:\n\t\tdef loop(n):\n\t\t\treturn loop(n)\n\tpointcut(Exp, e): loop(1)\n\tpointcut(Assign, l, r): raise ValueError('bad')\n",
        );
        let exp = fx.scfg.find(2, StatementLabel::Exp).unwrap();
        let err = run(&fx, exp, &mut TraversalMap::new()).unwrap_err();
        assert!(err.to_string().contains("call depth exceeds 64"), "{err}");
        let assign = fx.scfg.find(1, StatementLabel::Assign).unwrap();
        let err = run(&fx, assign, &mut TraversalMap::new()).unwrap_err();
        assert_eq!(
            err,
            RuntimeError::Raised {
                line: 6,
                kind: "ValueError".into(),
                message: "bad".into()
            }
        );
    }
}
