//! Python procedures lowered to labelled statements with def/use/call facts.

mod lines;
mod lower;
mod usage;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lines::LineIndex;
pub use lower::parse_procedure;
pub use usage::extract_usage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{path}:{line}:{column}: syntax error: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("procedure `{0}` not found")]
    NotFound(String),
    #[error("line {line}: unsupported construct `{construct}`")]
    Unsupported { construct: String, line: usize },
    #[error("malformed qualifier `{0}`, expected <path>:<name>")]
    Qualifier(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatementLabel {
    EnterProcedure,
    ExitProcedure,
    EnterContainer,
    ExitContainer,
    Assign,
    Exp,
    If,
    Else,
    While,
    For,
    With,
    Try,
    Except,
    Finally,
    Match,
    Case,
    Return,
    Raise,
    Pass,
    Break,
    Continue,
    Import,
    EndIf,
    EndElse,
    EndWhile,
    EndFor,
    EndWith,
    EndTry,
    EndMatch,
}

impl StatementLabel {
    pub const ALL: [StatementLabel; 29] = [
        Self::EnterProcedure,
        Self::ExitProcedure,
        Self::EnterContainer,
        Self::ExitContainer,
        Self::Assign,
        Self::Exp,
        Self::If,
        Self::Else,
        Self::While,
        Self::For,
        Self::With,
        Self::Try,
        Self::Except,
        Self::Finally,
        Self::Match,
        Self::Case,
        Self::Return,
        Self::Raise,
        Self::Pass,
        Self::Break,
        Self::Continue,
        Self::Import,
        Self::EndIf,
        Self::EndElse,
        Self::EndWhile,
        Self::EndFor,
        Self::EndWith,
        Self::EndTry,
        Self::EndMatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EnterProcedure => "EnterProcedure",
            Self::ExitProcedure => "ExitProcedure",
            Self::EnterContainer => "EnterContainer",
            Self::ExitContainer => "ExitContainer",
            Self::Assign => "Assign",
            Self::Exp => "Exp",
            Self::If => "If",
            Self::Else => "Else",
            Self::While => "While",
            Self::For => "For",
            Self::With => "With",
            Self::Try => "Try",
            Self::Except => "Except",
            Self::Finally => "Finally",
            Self::Match => "Match",
            Self::Case => "Case",
            Self::Return => "Return",
            Self::Raise => "Raise",
            Self::Pass => "Pass",
            Self::Break => "Break",
            Self::Continue => "Continue",
            Self::Import => "Import",
            Self::EndIf => "EndIf",
            Self::EndElse => "EndElse",
            Self::EndWhile => "EndWhile",
            Self::EndFor => "EndFor",
            Self::EndWith => "EndWith",
            Self::EndTry => "EndTry",
            Self::EndMatch => "EndMatch",
        }
    }

    /// Labels that own an ending state.
    pub fn is_branching(self) -> bool {
        matches!(
            self,
            Self::If | Self::Try | Self::Else | Self::Match | Self::With | Self::While | Self::For
        )
    }

    pub fn is_loop(self) -> bool {
        matches!(self, Self::For | Self::While)
    }

    pub fn ending(self) -> Option<StatementLabel> {
        Some(match self {
            Self::If => Self::EndIf,
            Self::Else => Self::EndElse,
            Self::While => Self::EndWhile,
            Self::For => Self::EndFor,
            Self::With => Self::EndWith,
            Self::Try => Self::EndTry,
            Self::Match => Self::EndMatch,
            _ => return None,
        })
    }

    pub fn is_ending(self) -> bool {
        matches!(
            self,
            Self::EndIf
                | Self::EndElse
                | Self::EndWhile
                | Self::EndFor
                | Self::EndWith
                | Self::EndTry
                | Self::EndMatch
        )
    }
}

impl fmt::Display for StatementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatementLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown statement label `{s}`"))
    }
}

/// The ⟨Def, Use, Call⟩ triple of one statement expression.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExprUsage {
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    pub calls: BTreeSet<String>,
}

impl ExprUsage {
    pub fn new<I, J, K, S1, S2, S3>(defs: I, uses: J, calls: K) -> Self
    where
        I: IntoIterator<Item = S1>,
        J: IntoIterator<Item = S2>,
        K: IntoIterator<Item = S3>,
        S1: Into<String>,
        S2: Into<String>,
        S3: Into<String>,
    {
        let defs: BTreeSet<String> = defs.into_iter().map(Into::into).collect();
        let uses = uses
            .into_iter()
            .map(Into::into)
            .filter(|u| !defs.contains(u))
            .collect();
        Self {
            defs,
            uses,
            calls: calls.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty() && self.uses.is_empty() && self.calls.is_empty()
    }
}

impl fmt::Display for ExprUsage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        write!(
            f,
            "{{{}}}/{{{}}}/{{{}}}",
            join(&self.defs),
            join(&self.uses),
            join(&self.calls)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementIR {
    pub point: u32,
    pub loc: usize,
    pub end_loc: Option<usize>,
    pub label: StatementLabel,
    pub exprs: Vec<ExprUsage>,
    pub body: Body,
}

/// Nested statements, shaped by the statement kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Body {
    None,
    /// with, else, except, finally and case clauses
    Block(Vec<StatementIR>),
    If {
        then: Vec<StatementIR>,
        orelse: Vec<StatementIR>,
    },
    Loop {
        body: Vec<StatementIR>,
        orelse: Option<Box<StatementIR>>,
    },
    Try {
        body: Vec<StatementIR>,
        handlers: Vec<StatementIR>,
        orelse: Option<Box<StatementIR>>,
        finalbody: Option<Box<StatementIR>>,
    },
    Match {
        cases: Vec<StatementIR>,
    },
}

impl StatementIR {
    /// Pre-order walk over this statement and everything nested in it.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a StatementIR>) {
        out.push(self);
        let seq = |v: &'a Vec<StatementIR>, out: &mut Vec<&'a StatementIR>| {
            for s in v {
                s.walk(out);
            }
        };
        match &self.body {
            Body::None => {}
            Body::Block(b) => seq(b, out),
            Body::If { then, orelse } => {
                seq(then, out);
                seq(orelse, out);
            }
            Body::Loop { body, orelse } => {
                seq(body, out);
                if let Some(e) = orelse {
                    e.walk(out);
                }
            }
            Body::Try {
                body,
                handlers,
                orelse,
                finalbody,
            } => {
                seq(body, out);
                seq(handlers, out);
                if let Some(e) = orelse {
                    e.walk(out);
                }
                if let Some(f) = finalbody {
                    f.walk(out);
                }
            }
            Body::Match { cases } => seq(cases, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcedureIR {
    pub qualifier: String,
    pub inputs: BTreeSet<String>,
    pub line_start: usize,
    pub line_end: usize,
    /// True for class bodies (EnterContainer/ExitContainer).
    pub container: bool,
    pub statements: Vec<StatementIR>,
}

impl ProcedureIR {
    pub fn flatten(&self) -> Vec<&StatementIR> {
        let mut out = Vec::new();
        for s in &self.statements {
            s.walk(&mut out);
        }
        out
    }

    pub fn statement_count(&self) -> usize {
        self.flatten().len()
    }
}

/// Splits `path:Name` at the last colon.
pub fn split_qualifier(qualifier: &str) -> Result<(&str, &str), FrontendError> {
    match qualifier.rsplit_once(':') {
        Some((path, name)) if !name.is_empty() => Ok((path, name)),
        _ => Err(FrontendError::Qualifier(qualifier.to_string())),
    }
}
