//! The static-aspect definition language: syntax tree, parser, validation, printing.

mod annotation;
mod lexer;
mod parser;
mod pretty;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::frontend::StatementLabel;
use crate::value::AspectValue;

pub use annotation::{parse_source_annotation, AnnotationError, SourceAnnotation};
pub use lexer::{tokenize, Tok, Token};
pub use parser::parse_program;
pub use pretty::pretty;
pub use validate::{validate, BUILTINS, PRIMITIVES};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SableError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
}

/// Parses and validates definition text.
pub fn parse_sable(text: &str) -> Result<SableProgram, SableError> {
    let program = parse_program(text)?;
    validate(&program)?;
    Ok(program)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SableProgram {
    pub traversals: Vec<TraversalDef>,
}

impl SableProgram {
    pub fn traversal(&self, name: &str) -> Option<&TraversalDef> {
        self.traversals.iter().find(|t| t.name == name)
    }

    /// Concatenates programs, keeping traversal order.
    pub fn merge(programs: impl IntoIterator<Item = SableProgram>) -> SableProgram {
        SableProgram {
            traversals: programs.into_iter().flat_map(|p| p.traversals).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AspectType {
    Bool,
    Int,
    Str,
    Set,
    List,
    Map,
}

impl AspectType {
    pub fn parse(name: &str) -> Option<AspectType> {
        Some(match name {
            "bool" => Self::Bool,
            "int" => Self::Int,
            "str" | "string" => Self::Str,
            "set" => Self::Set,
            "list" => Self::List,
            "dict" | "map" => Self::Map,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bool => "bool",
            Self::Int => "int",
            Self::Str => "str",
            Self::Set => "set",
            Self::List => "list",
            Self::Map => "dict",
        }
    }

    /// None is accepted for every type.
    pub fn admits(self, v: &AspectValue) -> bool {
        matches!(
            (self, v),
            (_, AspectValue::None)
                | (Self::Bool, AspectValue::Bool(_))
                | (Self::Int, AspectValue::Int(_))
                | (Self::Str, AspectValue::Str(_))
                | (Self::Set, AspectValue::Set(_))
                | (Self::List, AspectValue::List(_))
                | (Self::Map, AspectValue::Map(_))
        )
    }
}

impl fmt::Display for AspectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportDecl {
    pub traversal: String,
    pub aspects: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectDecl {
    pub name: String,
    pub ty: AspectType,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerDecl {
    pub aspect: String,
    pub value: AspectValue,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationDecl {
    pub var: String,
    pub path: Option<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pointcut {
    pub label: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeDef {
    pub params: (String, String),
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraversalDef {
    pub name: String,
    pub line: usize,
    pub imports: Vec<ImportDecl>,
    pub annotation: Option<AnnotationDecl>,
    pub aspects: Vec<AspectDecl>,
    pub triggers: Vec<TriggerDecl>,
    pub utilities: Vec<FunctionDef>,
    /// `import`/`from` lines found in utility blocks; rejected by validation.
    pub utility_imports: Vec<(usize, String)>,
    pub pointcuts: Vec<Pointcut>,
    pub merges: Vec<MergeDef>,
}

impl TraversalDef {
    pub fn new(name: impl Into<String>, line: usize) -> Self {
        TraversalDef {
            name: name.into(),
            line,
            imports: Vec::new(),
            annotation: None,
            aspects: Vec::new(),
            triggers: Vec::new(),
            utilities: Vec::new(),
            utility_imports: Vec::new(),
            pointcuts: Vec::new(),
            merges: Vec::new(),
        }
    }

    pub fn dependencies(&self) -> BTreeSet<String> {
        self.imports.iter().map(|i| i.traversal.clone()).collect()
    }

    pub fn aspect_type(&self, name: &str) -> Option<AspectType> {
        self.aspects.iter().find(|a| a.name == name).map(|a| a.ty)
    }

    pub fn imported_aspects(&self) -> BTreeSet<String> {
        self.imports
            .iter()
            .flat_map(|i| i.aspects.iter().cloned())
            .collect()
    }

    pub fn triggers_of(&self, aspect: &str) -> BTreeSet<AspectValue> {
        self.triggers
            .iter()
            .filter(|t| t.aspect == aspect)
            .map(|t| t.value.clone())
            .collect()
    }

    pub fn trigger_map(&self) -> BTreeMap<String, BTreeSet<AspectValue>> {
        let mut m: BTreeMap<String, BTreeSet<AspectValue>> = BTreeMap::new();
        for t in &self.triggers {
            m.entry(t.aspect.clone())
                .or_default()
                .insert(t.value.clone());
        }
        m
    }

    pub fn pointcut(&self, label: StatementLabel) -> Option<&Pointcut> {
        self.pointcuts.iter().find(|p| p.label == label.as_str())
    }

    pub fn utility(&self, name: &str) -> Option<&FunctionDef> {
        self.utilities.iter().find(|u| u.name == name)
    }

    pub fn merge(&self) -> Option<&MergeDef> {
        self.merges.first()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Assign {
        target: Target,
        value: Expr,
    },
    AugAssign {
        target: Target,
        op: BinOp,
        value: Expr,
    },
    If {
        branches: Vec<(Expr, Vec<Stmt>)>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Target,
        iter: Expr,
        body: Vec<Stmt>,
    },
    Return(Option<Expr>),
    Raise(Option<Expr>),
    Pass,
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Name(String),
    Subscript(Box<Expr>, Box<Expr>),
    Tuple(Vec<Target>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Name(String),
    Lit(AspectValue),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Set(Vec<Expr>),
    Dict(Vec<(Expr, Expr)>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Compare(Box<Expr>, Vec<(CmpOp, Expr)>),
    IfExp {
        cond: Box<Expr>,
        then: Box<Expr>,
        orelse: Box<Expr>,
    },
    Call(Box<Expr>, Vec<Expr>),
    Method(Box<Expr>, String, Vec<Expr>),
    Subscript(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    BitOr,
    BitAnd,
    BitXor,
    Add,
    Sub,
    Mul,
    FloorDiv,
    Mod,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::BitOr => "|",
            Self::BitAnd => "&",
            Self::BitXor => "^",
            Self::Add => "+",
            Self::Sub => "-",
            Self::Mul => "*",
            Self::FloorDiv => "//",
            Self::Mod => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    In,
    NotIn,
    Is,
    IsNot,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Eq => "==",
            Self::NotEq => "!=",
            Self::Lt => "<",
            Self::LtE => "<=",
            Self::Gt => ">",
            Self::GtE => ">=",
            Self::In => "in",
            Self::NotIn => "not in",
            Self::Is => "is",
            Self::IsNot => "is not",
        }
    }
}
