use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use crate::frontend::ExprUsage;
use crate::scfg::StateId;
use crate::value::AspectValue;

/// Live advice value; containers are shared so aliases observe mutation.
#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Str(Rc<str>),
    Set(Rc<RefCell<BTreeSet<AspectValue>>>),
    List(Rc<RefCell<Vec<Value>>>),
    Map(Rc<RefCell<BTreeMap<AspectValue, Value>>>),
    Tuple(Rc<Vec<Value>>),
    Expr(Rc<ExprUsage>),
    State(StateId),
    Annotation,
    Builtin(&'static str),
    Func(Rc<str>),
    AspectRef(Rc<str>),
    Exception(Rc<str>, Rc<str>),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn set(items: BTreeSet<AspectValue>) -> Value {
        Value::Set(Rc::new(RefCell::new(items)))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn map(items: BTreeMap<AspectValue, Value>) -> Value {
        Value::Map(Rc::new(RefCell::new(items)))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "str",
            Value::Set(_) => "set",
            Value::List(_) => "list",
            Value::Map(_) => "dict",
            Value::Tuple(_) => "tuple",
            Value::Expr(_) => "expression",
            Value::State(_) => "state",
            Value::Annotation => "annotation",
            Value::Builtin(_) | Value::Func(_) => "function",
            Value::AspectRef(_) => "aspect",
            Value::Exception(..) => "exception",
        }
    }

    /// Converts to a storable value; `None` for non-data values.
    pub fn freeze(&self) -> Option<AspectValue> {
        Some(match self {
            Value::None => AspectValue::None,
            Value::Bool(b) => AspectValue::Bool(*b),
            Value::Int(i) => AspectValue::Int(*i),
            Value::Str(s) => AspectValue::Str(s.to_string()),
            Value::Set(s) => AspectValue::Set(s.borrow().clone()),
            Value::List(l) => AspectValue::List(
                l.borrow()
                    .iter()
                    .map(Value::freeze)
                    .collect::<Option<Vec<_>>>()?,
            ),
            Value::Tuple(t) => {
                AspectValue::List(t.iter().map(Value::freeze).collect::<Option<Vec<_>>>()?)
            }
            Value::Map(m) => AspectValue::Map(
                m.borrow()
                    .iter()
                    .map(|(k, v)| v.freeze().map(|v| (k.clone(), v)))
                    .collect::<Option<BTreeMap<_, _>>>()?,
            ),
            _ => return None,
        })
    }

    /// Fresh, unshared copy of a stored value.
    pub fn thaw(v: &AspectValue) -> Value {
        match v {
            AspectValue::None => Value::None,
            AspectValue::Bool(b) => Value::Bool(*b),
            AspectValue::Int(i) => Value::Int(*i),
            AspectValue::Str(s) => Value::str(s),
            AspectValue::Set(s) => Value::set(s.clone()),
            AspectValue::List(l) => Value::list(l.iter().map(Value::thaw).collect()),
            AspectValue::Map(m) => {
                Value::map(m.iter().map(|(k, v)| (k.clone(), Value::thaw(v))).collect())
            }
        }
    }

    pub fn deep_copy(&self) -> Value {
        match self.freeze() {
            Some(f) if !matches!(self, Value::Tuple(_)) => Value::thaw(&f),
            _ => self.clone(),
        }
    }

    pub fn py_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Expr(a), Value::Expr(b)) => a == b,
            (Value::State(a), Value::State(b)) => a == b,
            (Value::Annotation, Value::Annotation) => true,
            (Value::Builtin(a), Value::Builtin(b)) => a == b,
            (Value::Func(a), Value::Func(b)) | (Value::AspectRef(a), Value::AspectRef(b)) => a == b,
            (Value::Exception(a, m), Value::Exception(b, n)) => a == b && m == n,
            (Value::Tuple(a), Value::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.py_eq(y))
            }
            (Value::List(a), Value::List(b)) => {
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.py_eq(y))
            }
            (Value::Map(a), Value::Map(b)) => {
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len()
                    && a.iter()
                        .zip(b.iter())
                        .all(|((ka, va), (kb, vb))| ka == kb && va.py_eq(vb))
            }
            _ => match (self.freeze(), other.freeze()) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            },
        }
    }

    pub fn is(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Set(a), Value::Set(b)) => Rc::ptr_eq(a, b),
            (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b),
            (Value::Map(a), Value::Map(b)) => Rc::ptr_eq(a, b),
            (Value::Tuple(a), Value::Tuple(b)) => Rc::ptr_eq(a, b),
            (Value::Expr(a), Value::Expr(b)) => Rc::ptr_eq(a, b),
            (Value::None, Value::None) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            _ => self.py_eq(other) && !matches!(self, Value::Str(_) | Value::Int(_)),
        }
    }

    /// Python `str()`.
    pub fn to_py_str(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            Value::Exception(_, m) => m.to_string(),
            other => other.to_string(),
        }
    }
}

/// Python `repr()`.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.freeze() {
            if let Value::Tuple(t) = self {
                let items: Vec<String> = t.iter().map(ToString::to_string).collect();
                return if items.len() == 1 {
                    write!(f, "({},)", items[0])
                } else {
                    write!(f, "({})", items.join(", "))
                };
            }
            return write!(f, "{v}");
        }
        match self {
            Value::Expr(e) => write!(f, "<expr {e}>"),
            Value::State(s) => write!(f, "<state {s}>"),
            Value::Annotation => f.write_str("<source annotation>"),
            Value::Builtin(n) => write!(f, "<built-in {n}>"),
            Value::Func(n) => write!(f, "<function {n}>"),
            Value::AspectRef(n) => write!(f, "<aspect {n}>"),
            Value::Exception(k, m) => write!(f, "{k}({:?})", m.as_ref()),
            Value::Tuple(t) => {
                let items: Vec<String> = t.iter().map(ToString::to_string).collect();
                write!(f, "({})", items.join(", "))
            }
            Value::List(l) => {
                let items: Vec<String> = l.borrow().iter().map(ToString::to_string).collect();
                write!(f, "[{}]", items.join(", "))
            }
            Value::Map(m) => {
                let items: Vec<String> = m
                    .borrow()
                    .iter()
                    .map(|(k, v)| format!("{k}: {v}"))
                    .collect();
                write!(f, "{{{}}}", items.join(", "))
            }
            _ => f.write_str("?"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thaw_shares_nothing() {
        let frozen = AspectValue::List(vec![AspectValue::str_set(["a"])]);
        let a = Value::thaw(&frozen);
        let b = a.deep_copy();
        if let Value::List(l) = &a {
            l.borrow_mut().push(Value::Int(1));
        }
        assert_eq!(b.freeze().unwrap(), frozen);
        assert_eq!(
            a.freeze().unwrap(),
            AspectValue::List(vec![AspectValue::str_set(["a"]), AspectValue::Int(1)])
        );
    }

    #[test]
    fn non_data_values_do_not_freeze() {
        assert!(Value::State(3).freeze().is_none());
        assert!(Value::list(vec![Value::Annotation]).freeze().is_none());
    }
}
