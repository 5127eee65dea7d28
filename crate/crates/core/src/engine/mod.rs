//! Traversal ordering and execution over an SCFG.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::runtime::{Host, Interpreter, RuntimeError, DEFAULT_MAX_DEPTH};
pub use crate::runtime::{StateAnnotation, TraversalMap};
use crate::sable::{SableProgram, TraversalDef};
use crate::scfg::{Scfg, StateId};
use crate::value::AspectValue;

pub const DEFAULT_LOOP_CAP: usize = 1000;

pub const CONFLICT_MESSAGE: &str = "Conflict of values: for non-Boolean, non-set values, values for both traversal maps are expected to be the same.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{CONFLICT_MESSAGE} (aspect `{aspect}`: {left} vs {right})")]
pub struct MergeConflict {
    pub aspect: String,
    pub left: AspectValue,
    pub right: AspectValue,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("cyclic traversal dependencies among {0:?}")]
    Cycle(Vec<String>),
    #[error("traversal `{traversal}` depends on unknown traversal `{missing}`")]
    UnknownDependency { traversal: String, missing: String },
    #[error("traversal `{traversal}`, state {state}, step {step}: {source}")]
    Advice {
        traversal: String,
        state: String,
        step: u64,
        source: RuntimeError,
    },
    #[error("traversal `{traversal}`, join point {state}: {message}")]
    Merge {
        traversal: String,
        state: String,
        message: String,
    },
    #[error("traversal `{traversal}`: loop {state} did not reach a fixpoint after {cap} body traversals")]
    Divergence {
        traversal: String,
        state: String,
        cap: usize,
    },
}

/// Orders traversals so that each follows the traversals it imports from.
///
/// Traversals that become valid in the same round keep their input order.
pub fn order_traversals(
    names: &[String],
    deps: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Vec<String>, EngineError> {
    let known: BTreeSet<&String> = names.iter().collect();
    for (t, ds) in deps {
        if let Some(missing) = ds.iter().find(|d| !known.contains(d)) {
            return Err(EngineError::UnknownDependency {
                traversal: t.clone(),
                missing: missing.clone(),
            });
        }
    }
    let mut remaining: Vec<&String> = names.iter().collect();
    let mut ordered: Vec<String> = Vec::new();
    while !remaining.is_empty() {
        let done: BTreeSet<&String> = ordered.iter().collect();
        let (valid, rest): (Vec<&String>, Vec<&String>) = remaining.into_iter().partition(|t| {
            deps.get(*t)
                .is_none_or(|ds| ds.iter().all(|d| done.contains(d)))
        });
        if valid.is_empty() {
            return Err(EngineError::Cycle(rest.into_iter().cloned().collect()));
        }
        ordered.extend(valid.into_iter().cloned());
        remaining = rest;
    }
    Ok(ordered)
}

pub fn merge_default(m1: &TraversalMap, m2: &TraversalMap) -> Result<TraversalMap, MergeConflict> {
    let mut out = TraversalMap::new();
    for (name, v1) in m1 {
        let merged = match (v1, m2.get(name)) {
            (_, None) => v1.clone(),
            (AspectValue::Bool(a), Some(AspectValue::Bool(b))) => AspectValue::Bool(*a || *b),
            (AspectValue::Set(a), Some(AspectValue::Set(b))) => {
                AspectValue::Set(a.union(b).cloned().collect())
            }
            (a, Some(b)) if a == b => a.clone(),
            (a, Some(b)) => {
                return Err(MergeConflict {
                    aspect: name.clone(),
                    left: a.clone(),
                    right: b.clone(),
                })
            }
        };
        out.insert(name.clone(), merged);
    }
    for (name, v2) in m2 {
        out.entry(name.clone()).or_insert_with(|| v2.clone());
    }
    Ok(out)
}

/// True when every entry of `map` already sits, unchanged, in `old`.
pub fn is_fixpoint(old: &StateAnnotation, map: &TraversalMap) -> bool {
    map.iter().all(|(k, v)| old.get(k) == Some(v))
}

/// Alarms keyed by state, then step, then aspect name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlarmLedger(pub BTreeMap<StateId, BTreeMap<u64, BTreeMap<String, AspectValue>>>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alarm {
    pub state: StateId,
    pub step: u64,
    pub aspect: String,
    pub value: AspectValue,
}

impl AlarmLedger {
    pub fn record(&mut self, state: StateId, step: u64, aspect: &str, value: AspectValue) {
        self.0
            .entry(state)
            .or_default()
            .entry(step)
            .or_default()
            .insert(aspect.to_string(), value);
    }

    pub fn alarms(&self) -> Vec<Alarm> {
        let mut out = Vec::new();
        for (state, steps) in &self.0 {
            for (step, aspects) in steps {
                for (aspect, value) in aspects {
                    out.push(Alarm {
                        state: *state,
                        step: *step,
                        aspect: aspect.clone(),
                        value: value.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.0
            .values()
            .flat_map(|s| s.values())
            .map(BTreeMap::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub loop_cap: usize,
    pub max_call_depth: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            loop_cap: DEFAULT_LOOP_CAP,
            max_call_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeaveEvent {
    pub step: u64,
    pub traversal: String,
    pub state: StateId,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub order: Vec<String>,
    pub ledger: AlarmLedger,
    pub annotations: Vec<StateAnnotation>,
    pub steps: u64,
    /// Loop-body traversals per (traversal, loop state).
    pub loop_entries: BTreeMap<(String, StateId), usize>,
    pub trace: Vec<WeaveEvent>,
}

impl AnalysisOutcome {
    pub fn loop_entries_of(&self, traversal: &str, state: StateId) -> usize {
        self.loop_entries
            .get(&(traversal.to_string(), state))
            .copied()
            .unwrap_or(0)
    }
}

pub fn traversal_order(program: &SableProgram) -> Result<Vec<String>, EngineError> {
    let names: Vec<String> = program.traversals.iter().map(|t| t.name.clone()).collect();
    let deps = program
        .traversals
        .iter()
        .map(|t| (t.name.clone(), t.dependencies()))
        .collect();
    order_traversals(&names, &deps)
}

/// Runs every traversal of `program` over `scfg`, in dependency order.
pub fn analyze(
    scfg: &Scfg,
    program: &SableProgram,
    source: Option<&BTreeMap<String, Vec<String>>>,
    config: EngineConfig,
) -> Result<AnalysisOutcome, EngineError> {
    let order = traversal_order(program)?;
    let mut engine = Engine {
        scfg,
        source,
        config,
        annotations: vec![StateAnnotation::new(); scfg.len()],
        enter_loop: vec![false; scfg.len()],
        ledger: AlarmLedger::default(),
        step: 0,
        loop_entries: BTreeMap::new(),
        trace: Vec::new(),
    };
    for name in &order {
        let trav = program.traversal(name).expect("ordered name");
        engine.run_traversal(trav)?;
    }
    Ok(AnalysisOutcome {
        order,
        ledger: engine.ledger,
        annotations: engine.annotations,
        steps: engine.step,
        loop_entries: engine.loop_entries,
        trace: engine.trace,
    })
}

struct Engine<'a> {
    scfg: &'a Scfg,
    source: Option<&'a BTreeMap<String, Vec<String>>>,
    config: EngineConfig,
    annotations: Vec<StateAnnotation>,
    enter_loop: Vec<bool>,
    ledger: AlarmLedger,
    step: u64,
    loop_entries: BTreeMap<(String, StateId), usize>,
    trace: Vec<WeaveEvent>,
}

type R<T> = Result<T, EngineError>;

impl<'a> Engine<'a> {
    fn run_traversal(&mut self, trav: &TraversalDef) -> R<()> {
        for (i, s) in self.scfg.states().iter().enumerate() {
            self.enter_loop[i] = s.label.is_loop();
        }
        let init: TraversalMap = trav
            .aspects
            .iter()
            .map(|a| (a.name.clone(), AspectValue::None))
            .collect();
        self.visit(trav, self.scfg.start(), None, init.clone())?;
        let end = self.scfg.end();
        let mut last = init;
        for (k, v) in last.iter_mut() {
            if let Some(a) = self.annotations[end].get(k) {
                *v = a.clone();
            }
        }
        let last = self.weave(trav, end, last)?;
        self.annotate(end, &last);
        Ok(())
    }

    fn visit(
        &mut self,
        trav: &TraversalDef,
        mut state: StateId,
        join: Option<StateId>,
        mut map: TraversalMap,
    ) -> R<(StateId, TraversalMap)> {
        let end = self.scfg.end();
        loop {
            if Some(state) == join {
                return Ok((state, map));
            }
            let label = self.scfg.state(state).label;
            let old = label.is_loop().then(|| self.annotations[state].clone());
            map = if state == end {
                self.merge_at_end(trav, map)?
            } else {
                self.weave(trav, state, map)?
            };
            self.annotate(state, &map);
            let children = self.scfg.children(state);
            match children.len() {
                0 => return Ok((state, map)),
                1 => state = children[0],
                _ if label.is_loop() => {
                    let exit = self
                        .scfg
                        .ending_state(state)
                        .expect("loop has an ending state");
                    if is_fixpoint(old.as_ref().expect("loop annotation"), &map) {
                        self.enter_loop[state] = true;
                        state = exit;
                    } else {
                        self.enter_loop[state] = false;
                        let n = self
                            .loop_entries
                            .entry((trav.name.clone(), state))
                            .or_insert(0);
                        *n += 1;
                        if *n > self.config.loop_cap {
                            return Err(EngineError::Divergence {
                                traversal: trav.name.clone(),
                                state: self.scfg.state(state).name(),
                                cap: self.config.loop_cap,
                            });
                        }
                        state = *children
                            .iter()
                            .find(|c| **c != exit)
                            .expect("loop body entry");
                    }
                }
                _ => {
                    // No ending state when every branch leaves the procedure.
                    let exit = self.scfg.ending_state(state);
                    let mut maps = Vec::new();
                    for &child in children {
                        let (terminal, m) = self.visit(trav, child, exit, map.clone())?;
                        if terminal != end {
                            maps.push(m);
                        }
                    }
                    let mut it = maps.into_iter();
                    let (Some(exit), Some(first)) = (exit, it.next()) else {
                        return Ok((end, map));
                    };
                    let mut merged = first;
                    for m in it {
                        merged = self.merge(trav, exit, &merged, &m)?;
                    }
                    map = merged;
                    state = exit;
                }
            }
        }
    }

    fn merge_at_end(&mut self, trav: &TraversalDef, map: TraversalMap) -> R<TraversalMap> {
        let end = self.scfg.end();
        let previous: TraversalMap = self.annotations[end]
            .iter()
            .filter(|(k, _)| trav.aspect_type(k).is_some())
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        if previous.is_empty() {
            return Ok(map);
        }
        self.merge(trav, end, &previous, &map)
    }

    fn merge(
        &mut self,
        trav: &TraversalDef,
        at: StateId,
        a: &TraversalMap,
        b: &TraversalMap,
    ) -> R<TraversalMap> {
        let result = match trav.merge() {
            Some(m) => {
                let mut interp = Interpreter::new(self.host(trav));
                interp.merge(m, a, b).map_err(|e| e.to_string())
            }
            None => merge_default(a, b).map_err(|e| e.to_string()),
        };
        result.map_err(|message| EngineError::Merge {
            traversal: trav.name.clone(),
            state: self.scfg.state(at).name(),
            message,
        })
    }

    fn host<'b>(&'b self, trav: &'b TraversalDef) -> Host<'b> {
        Host {
            scfg: self.scfg,
            traversal: trav,
            source: self.source,
            annotations: &self.annotations,
            enter_loop: &self.enter_loop,
            max_depth: self.config.max_call_depth,
        }
    }

    fn weave(
        &mut self,
        trav: &TraversalDef,
        state: StateId,
        mut map: TraversalMap,
    ) -> R<TraversalMap> {
        self.step += 1;
        let step = self.step;
        self.trace.push(WeaveEvent {
            step,
            traversal: trav.name.clone(),
            state,
        });
        let mut interp = Interpreter::new(self.host(trav));
        interp
            .weave(state, &mut map)
            .map_err(|source| EngineError::Advice {
                traversal: trav.name.clone(),
                state: self.scfg.state(state).name(),
                step,
                source,
            })?;
        for (aspect, value) in &map {
            if trav
                .triggers
                .iter()
                .any(|t| &t.aspect == aspect && &t.value == value)
            {
                self.ledger.record(state, step, aspect, value.clone());
            }
        }
        Ok(map)
    }

    fn annotate(&mut self, state: StateId, map: &TraversalMap) {
        let a = &mut self.annotations[state];
        for (k, v) in map {
            a.insert(k.clone(), v.clone());
        }
    }
}
