//! The shipped aspect library and its fixture corpus.
//!
//! Assets live under `crates/core/library/`, indexed by `library.json`. They
//! are embedded at build time; [`Library::discover`] prefers a directory named
//! by `SABLE_LIBRARY_DIR` when it is set.
//!
//! Helper bodies, spelled out:
//!
//! - `isIntersection(A, B)` is `len(A & B) > 0`; `isEmpty(A)` is `len(A) == 0`.
//! - `getUseCall(expr)` is the union of the `use` and `call` symbols.
//! - SourceTainting: `isTaintedExpr` tests the used/called symbols minus `Safe`
//!   against `Tainted`; `isVulnerableExpr` inverts it under `positiveTainting`;
//!   `infoFlowDef` adds the written symbols to `Tainted` when the right-hand
//!   side is tainted and removes them otherwise; `isVulnerableOutput` checks
//!   returned expressions when no sink is annotated. Options come from the
//!   `options` label (`positiveTainting`, `sensitiveBranching`,
//!   `untaintChecked`).
//! - CheckEndProc declares `Sources` and `Tainted`, which its rules read.
//!   `Tainted` follows assignments from the `sources` label.
//!   Conditions add their used and called symbols to `Checked`; a call in
//!   `preventCheck` empties it.
//! - CheckCalls declares `SafeOutputs` and `Returned`. Attribute calls are also
//!   recorded under their bare method name, so `verify` matches
//!   `hasher.verify(...)`. A procedure that never returns is checked at its
//!   exit.
//! - ContextualValue alarms when the recorded values miss the expected ones
//!   (`not isIntersection(...)`); without the negation it would alarm on the
//!   patched code.
//! - Every definition resets its trigger aspects at statements it does not
//!   otherwise handle, so a stale alarm value is not reported twice. `With`
//!   has no pointcut because its arity depends on the number of items.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::sable::{
    parse_sable, parse_source_annotation, AnnotationError, SableError, SableProgram,
    SourceAnnotation,
};

pub const LIBRARY_DIR_ENV: &str = "SABLE_LIBRARY_DIR";

macro_rules! embedded {
    ($($path:literal),* $(,)?) => {
        &[$(($path, include_str!(concat!("../library/", $path)))),*]
    };
}

static EMBEDDED: &[(&str, &str)] = embedded![
    "library.json",
    "running_example/static_aspect_definition.sable",
    "running_example/source_code.py",
    "running_example/source_annotation.json",
    "source_tainting/definition.sable",
    "source_tainting/cve_2016_10149/vulnerable.py",
    "source_tainting/cve_2016_10149/fixed.py",
    "source_tainting/cve_2016_10149/annotation.json",
    "source_tainting/cve_2014_1829/vulnerable.py",
    "source_tainting/cve_2014_1829/fixed.py",
    "source_tainting/cve_2014_1829/annotation.json",
    "check_end_proc/definition.sable",
    "check_end_proc/cve_2017_15612/vulnerable.py",
    "check_end_proc/cve_2017_15612/fixed.py",
    "check_end_proc/cve_2017_15612/annotation.json",
    "check_calls/definition.sable",
    "check_calls/cve_2016_2513/vulnerable.py",
    "check_calls/cve_2016_2513/fixed.py",
    "check_calls/cve_2016_2513/annotation.json",
    "involved_symbols/definition.sable",
    "involved_symbols/cve_2011_4030/vulnerable.py",
    "involved_symbols/cve_2011_4030/fixed.py",
    "involved_symbols/cve_2011_4030/annotation.json",
    "contextual_value/definition.sable",
    "contextual_value/cve_2015_3010/vulnerable.py",
    "contextual_value/cve_2015_3010/fixed.py",
    "contextual_value/cve_2015_3010/annotation.json",
];

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing library asset {0}")]
    Missing(String),
    #[error("library.json: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Sable { path: String, source: SableError },
    #[error("{path}: {source}")]
    Annotation {
        path: String,
        source: AnnotationError,
    },
    #[error("unknown library entry {0:?}")]
    UnknownEntry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Vulnerable,
    Fixed,
    /// Patched code that the definition still flags.
    KnownFalsePositive,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    entries: Vec<EntryRecord>,
    fixtures: Vec<FixtureRecord>,
}

#[derive(Debug, Deserialize)]
struct EntryRecord {
    name: String,
    definition: String,
    labels: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct FixtureRecord {
    id: String,
    entry: String,
    variant: Variant,
    source: String,
    annotation: String,
    qualifier: String,
    alarm_lines: Vec<usize>,
    #[serde(default)]
    note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LibraryEntry {
    pub name: String,
    pub definition_path: String,
    pub sable_text: String,
    pub program: SableProgram,
    pub annotation_schema: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub id: String,
    pub entry: String,
    pub variant: Variant,
    pub source_path: String,
    pub source: String,
    pub annotation_path: String,
    pub annotation: SourceAnnotation,
    pub qualifier: String,
    pub alarm_lines: Vec<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Library {
    pub entries: Vec<LibraryEntry>,
    pub fixtures: Vec<Fixture>,
}

enum Assets<'a> {
    Embedded,
    Dir(&'a Path),
}

impl Assets<'_> {
    fn read(&self, rel: &str) -> Result<String, LibraryError> {
        match self {
            Assets::Embedded => EMBEDDED
                .iter()
                .find(|(p, _)| *p == rel)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| LibraryError::Missing(rel.to_string())),
            Assets::Dir(dir) => {
                let path = dir.join(rel);
                std::fs::read_to_string(&path).map_err(|source| LibraryError::Io { path, source })
            }
        }
    }
}

impl Library {
    pub fn embedded() -> Result<Library, LibraryError> {
        Library::from_assets(&Assets::Embedded)
    }

    pub fn from_dir(dir: &Path) -> Result<Library, LibraryError> {
        Library::from_assets(&Assets::Dir(dir))
    }

    /// `explicit`, then `SABLE_LIBRARY_DIR`, then the embedded copy.
    pub fn discover(explicit: Option<&Path>) -> Result<Library, LibraryError> {
        if let Some(dir) = explicit {
            return Library::from_dir(dir);
        }
        match std::env::var_os(LIBRARY_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Library::from_dir(Path::new(&dir)),
            _ => Library::embedded(),
        }
    }

    fn from_assets(assets: &Assets) -> Result<Library, LibraryError> {
        let manifest: Manifest = serde_json::from_str(&assets.read("library.json")?)?;
        let mut entries = Vec::new();
        for e in manifest.entries {
            let sable_text = assets.read(&e.definition)?;
            let program = parse_sable(&sable_text).map_err(|source| LibraryError::Sable {
                path: e.definition.clone(),
                source,
            })?;
            entries.push(LibraryEntry {
                name: e.name,
                definition_path: e.definition,
                sable_text,
                program,
                annotation_schema: e.labels.into_iter().collect(),
            });
        }
        let mut fixtures = Vec::new();
        for f in manifest.fixtures {
            if !entries.iter().any(|e| e.name == f.entry) {
                return Err(LibraryError::UnknownEntry(f.entry));
            }
            let annotation =
                parse_source_annotation(&assets.read(&f.annotation)?).map_err(|source| {
                    LibraryError::Annotation {
                        path: f.annotation.clone(),
                        source,
                    }
                })?;
            fixtures.push(Fixture {
                id: f.id,
                entry: f.entry,
                variant: f.variant,
                source: assets.read(&f.source)?,
                source_path: f.source,
                annotation_path: f.annotation,
                annotation,
                qualifier: f.qualifier,
                alarm_lines: f.alarm_lines,
                note: f.note,
            });
        }
        Ok(Library { entries, fixtures })
    }

    pub fn entry(&self, name: &str) -> Result<&LibraryEntry, LibraryError> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| LibraryError::UnknownEntry(name.to_string()))
    }

    pub fn programs(&self) -> BTreeMap<String, SableProgram> {
        self.entries
            .iter()
            .map(|e| (e.name.clone(), e.program.clone()))
            .collect()
    }
}

/// Entry name to parsed program, from the discovered library.
pub fn load_library() -> Result<BTreeMap<String, SableProgram>, LibraryError> {
    Ok(Library::discover(None)?.programs())
}

pub fn load_fixture_corpus() -> Result<Vec<Fixture>, LibraryError> {
    Ok(Library::discover(None)?.fixtures)
}
