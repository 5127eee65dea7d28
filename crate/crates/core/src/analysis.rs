//! End-to-end pipeline for one procedure.

use thiserror::Error;

use crate::engine::{analyze, AnalysisOutcome, EngineConfig, EngineError};
use crate::frontend::{parse_procedure, FrontendError};
use crate::sable::{SableProgram, SourceAnnotation};
use crate::scfg::{Scfg, ScfgError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Scfg(#[from] ScfgError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub qualifier: String,
    pub scfg: Scfg,
    pub outcome: AnalysisOutcome,
}

pub fn analyze_source(
    source: &str,
    qualifier: &str,
    annotation: &SourceAnnotation,
    program: &SableProgram,
    config: EngineConfig,
) -> Result<Analysis, AnalysisError> {
    let ir = parse_procedure(source, qualifier)?;
    let scfg = Scfg::build(&ir)?;
    let outcome = analyze(&scfg, program, annotation.entry(qualifier), config)?;
    Ok(Analysis {
        qualifier: qualifier.to_string(),
        scfg,
        outcome,
    })
}
