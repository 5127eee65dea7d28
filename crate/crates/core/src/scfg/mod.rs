//! Symbolic control-flow graphs built from lowered procedures.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{Body, ExprUsage, ProcedureIR, StatementIR, StatementLabel};

pub type StateId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScfgError {
    #[error("line {0}: `break` outside a loop")]
    BreakOutsideLoop(usize),
    #[error("line {0}: `continue` outside a loop")]
    ContinueOutsideLoop(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymbolicState {
    pub point: u32,
    pub loc: usize,
    pub end_loc: Option<usize>,
    pub label: StatementLabel,
    pub exprs: Vec<ExprUsage>,
}

impl SymbolicState {
    pub fn key(&self) -> (u32, StatementLabel) {
        (self.point, self.label)
    }

    pub fn name(&self) -> String {
        format!("{}:{}", self.point, self.label)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Scfg {
    pub qualifier: String,
    states: Vec<SymbolicState>,
    succ: Vec<Vec<StateId>>,
    start: StateId,
    end: StateId,
    ending: BTreeMap<StateId, StateId>,
    regions: BTreeMap<StateId, Vec<StateId>>,
}

impl Scfg {
    pub fn build(proc_: &ProcedureIR) -> Result<Scfg, ScfgError> {
        Builder::new(proc_).run()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn end(&self) -> StateId {
        self.end
    }

    pub fn state(&self, id: StateId) -> &SymbolicState {
        &self.states[id]
    }

    pub fn states(&self) -> &[SymbolicState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Successors ordered by (point, label).
    pub fn children(&self, id: StateId) -> &[StateId] {
        &self.succ[id]
    }

    pub fn ending_state(&self, id: StateId) -> Option<StateId> {
        self.ending.get(&id).copied()
    }

    pub fn find(&self, point: u32, label: StatementLabel) -> Option<StateId> {
        self.states.iter().position(|s| s.key() == (point, label))
    }

    pub fn edges(&self) -> Vec<(StateId, StateId)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (a, b)))
            .collect()
    }

    /// States nested inside a branching statement, excluding its ending state.
    pub fn region(&self, id: StateId) -> &[StateId] {
        self.regions.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Edges among a loop state and the states of its body.
    pub fn loop_body_edges(&self, id: StateId) -> Vec<(StateId, StateId)> {
        let mut inside: BTreeSet<StateId> = self.region(id).iter().copied().collect();
        inside.insert(id);
        self.edges()
            .into_iter()
            .filter(|(a, b)| inside.contains(a) && inside.contains(b))
            .collect()
    }

    /// One `point|label|loc[-endLoc]|def/use/call` line per state, then sorted edges.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.qualifier);
        for s in &self.states {
            let loc = match s.end_loc {
                Some(e) => format!("{}-{}", s.loc, e),
                None => s.loc.to_string(),
            };
            let exprs: Vec<String> = s.exprs.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}|{}|{}|{}", s.point, s.label, loc, exprs.join(" "));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(
                out,
                "{} -> {}",
                self.states[a].name(),
                self.states[b].name()
            );
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph scfg {\n  node [shape=box];\n");
        for (i, s) in self.states.iter().enumerate() {
            let exprs: Vec<String> = s.exprs.iter().map(ToString::to_string).collect();
            let label = format!("{} (line {})\\n{}", s.name(), s.loc, exprs.join("\\n"));
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", label.replace('"', "\\\""));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    /// (loop state, its ending state)
    looping: Option<(StateId, StateId)>,
    /// Redirect target for return/raise under a finally clause.
    finally: Option<StateId>,
}

struct Builder<'p> {
    proc_: &'p ProcedureIR,
    states: Vec<SymbolicState>,
    index: BTreeMap<(u32, StatementLabel), StateId>,
    edges: BTreeSet<(StateId, StateId)>,
    ending: BTreeMap<StateId, StateId>,
    regions: BTreeMap<StateId, Vec<StateId>>,
    end: StateId,
}

impl<'p> Builder<'p> {
    fn new(proc_: &'p ProcedureIR) -> Self {
        Builder {
            proc_,
            states: Vec::new(),
            index: BTreeMap::new(),
            edges: BTreeSet::new(),
            ending: BTreeMap::new(),
            regions: BTreeMap::new(),
            end: 0,
        }
    }

    fn add(&mut self, st: SymbolicState) -> StateId {
        let id = self.states.len();
        self.index.insert(st.key(), id);
        self.states.push(st);
        id
    }

    fn id(&self, s: &StatementIR) -> StateId {
        self.index[&(s.point, s.label)]
    }

    fn end_of(&self, s: &StatementIR) -> StateId {
        self.ending[&self.id(s)]
    }

    fn edge(&mut self, a: StateId, b: StateId) {
        self.edges.insert((a, b));
    }

    fn run(mut self) -> Result<Scfg, ScfgError> {
        let p = self.proc_;
        let (enter, exit) = if p.container {
            (
                StatementLabel::EnterContainer,
                StatementLabel::ExitContainer,
            )
        } else {
            (
                StatementLabel::EnterProcedure,
                StatementLabel::ExitProcedure,
            )
        };
        let start = self.add(SymbolicState {
            point: 0,
            loc: p.line_start,
            end_loc: None,
            label: enter,
            exprs: vec![ExprUsage {
                defs: p.inputs.clone(),
                ..ExprUsage::default()
            }],
        });
        let flat = p.flatten();
        let mut max_point = 0;
        for s in &flat {
            max_point = max_point.max(s.point);
            let id = self.add(SymbolicState {
                point: s.point,
                loc: s.loc,
                end_loc: s.end_loc,
                label: s.label,
                exprs: s.exprs.clone(),
            });
            if let Some(end_label) = s.label.ending() {
                let e = self.add(SymbolicState {
                    point: s.point,
                    loc: s.end_loc.unwrap_or(s.loc),
                    end_loc: None,
                    label: end_label,
                    exprs: vec![],
                });
                self.ending.insert(id, e);
            }
        }
        for s in &flat {
            if s.label.is_branching() {
                let mut inner = Vec::new();
                s.walk(&mut inner);
                let mut region = Vec::new();
                let loop_else = match &s.body {
                    Body::Loop {
                        orelse: Some(e), ..
                    } => Some(e.point),
                    _ => None,
                };
                for n in inner.iter().skip(1) {
                    if loop_else.is_some_and(|ep| n.point >= ep) {
                        continue;
                    }
                    region.push(self.id(n));
                    if let Some(&e) = self.ending.get(&self.id(n)) {
                        region.push(e);
                    }
                }
                self.regions.insert(self.id(s), region);
            }
        }
        self.end = self.add(SymbolicState {
            point: max_point + 1,
            loc: p.line_end,
            end_loc: None,
            label: exit,
            exprs: vec![],
        });
        let ctx = Ctx {
            looping: None,
            finally: None,
        };
        let first = self.seq(&p.statements, self.end, ctx)?;
        self.edge(start, first);
        Ok(self.finish(start))
    }

    fn seq(
        &mut self,
        stmts: &[StatementIR],
        next: StateId,
        ctx: Ctx,
    ) -> Result<StateId, ScfgError> {
        let mut nxt = next;
        for s in stmts.iter().rev() {
            nxt = self.stmt(s, nxt, ctx)?;
        }
        Ok(nxt)
    }

    fn stmt(&mut self, s: &StatementIR, next: StateId, ctx: Ctx) -> Result<StateId, ScfgError> {
        use StatementLabel as L;
        let id = self.id(s);
        match (&s.body, s.label) {
            (Body::If { then, orelse }, _) => {
                let e = self.end_of(s);
                let t = self.seq(then, e, ctx)?;
                self.edge(id, t);
                if orelse.is_empty() {
                    self.edge(id, e);
                } else {
                    let f = self.seq(orelse, e, ctx)?;
                    self.edge(id, f);
                }
                self.edge(e, next);
            }
            (Body::Block(b), L::Else) => {
                let e = self.end_of(s);
                let first = self.seq(b, e, ctx)?;
                self.edge(id, first);
                self.edge(id, e);
                self.edge(e, next);
            }
            (Body::Block(b), L::With) => {
                let e = self.end_of(s);
                let first = self.seq(b, e, ctx)?;
                self.edge(id, first);
                self.edge(e, next);
            }
            (Body::Block(b), _) => {
                let first = self.seq(b, next, ctx)?;
                self.edge(id, first);
            }
            (Body::Match { cases }, _) => {
                let e = self.end_of(s);
                for c in cases {
                    let cid = self.stmt(c, e, ctx)?;
                    self.edge(id, cid);
                }
                self.edge(id, e);
                self.edge(e, next);
            }
            (Body::Loop { body, orelse }, _) => {
                let e = self.end_of(s);
                let inner = Ctx {
                    looping: Some((id, e)),
                    ..ctx
                };
                let first = self.seq(body, id, inner)?;
                self.edge(id, first);
                self.edge(id, e);
                match orelse {
                    Some(el) => {
                        let eid = self.stmt(el, next, ctx)?;
                        self.edge(e, eid);
                    }
                    None => self.edge(e, next),
                }
            }
            (
                Body::Try {
                    body,
                    handlers,
                    orelse,
                    finalbody,
                },
                _,
            ) => {
                let e = self.end_of(s);
                let fin = match finalbody {
                    Some(f) => Some(self.stmt(f, e, ctx)?),
                    None => None,
                };
                let after = fin.unwrap_or(e);
                let inner = Ctx {
                    finally: fin.or(ctx.finally),
                    ..ctx
                };
                let body_next = match orelse {
                    Some(el) => self.stmt(el, after, inner)?,
                    None => after,
                };
                let first = self.seq(body, body_next, inner)?;
                self.edge(id, first);
                for h in handlers {
                    let hid = self.stmt(h, after, inner)?;
                    self.edge(id, hid);
                }
                self.edge(e, next);
            }
            (Body::None, L::Continue) => {
                let (l, _) = ctx.looping.ok_or(ScfgError::ContinueOutsideLoop(s.loc))?;
                self.edge(id, l);
            }
            (Body::None, L::Break) => {
                let (_, e) = ctx.looping.ok_or(ScfgError::BreakOutsideLoop(s.loc))?;
                self.edge(id, e);
            }
            (Body::None, L::Return | L::Raise) => {
                let target = ctx.finally.unwrap_or(self.end);
                self.edge(id, target);
            }
            (Body::None, _) => self.edge(id, next),
        }
        Ok(id)
    }

    /// Drops states unreachable from `start` and renumbers by (point, label).
    fn finish(self, start: StateId) -> Scfg {
        let mut adj: Vec<Vec<StateId>> = vec![Vec::new(); self.states.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
        }
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        let mut kept: Vec<StateId> = (0..self.states.len()).filter(|&i| seen[i]).collect();
        kept.sort_by_key(|&i| self.states[i].key());
        let mut remap = vec![usize::MAX; self.states.len()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let states: Vec<SymbolicState> = kept.iter().map(|&i| self.states[i].clone()).collect();
        let mut succ: Vec<Vec<StateId>> = kept
            .iter()
            .map(|&i| adj[i].iter().map(|&j| remap[j]).collect())
            .collect();
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        let live = |i: &StateId| remap[*i] != usize::MAX;
        let ending = self
            .ending
            .iter()
            .filter(|(a, b)| live(a) && live(b))
            .map(|(&a, &b)| (remap[a], remap[b]))
            .collect();
        let regions = self
            .regions
            .iter()
            .filter(|(a, _)| live(a))
            .map(|(&a, r)| {
                let mut r: Vec<StateId> = r.iter().filter(|i| live(i)).map(|&i| remap[i]).collect();
                r.sort_unstable();
                (remap[a], r)
            })
            .collect();
        Scfg {
            qualifier: self.proc_.qualifier.clone(),
            states,
            succ,
            start: remap[start],
            end: remap[self.end],
            ending,
            regions,
        }
    }
}
