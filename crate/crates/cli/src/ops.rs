//! Engine operations shared by the subcommands and the HTTP handlers. Each
//! public function performs exactly one engine operation on one system.

use adr_core::bounded::Bounds;
use adr_core::ids::{EdgeId, VertexId};
use adr_core::io::{LiveSession, SystemEntry, Workspace};
use adr_core::logic::{parse_formula, Formula};
use adr_core::reconfig::{apply_anywhere, apply_reconfiguration, matches};
use adr_core::recovery::{Candidate, Decision, RecoveryError, RecoverySession, SessionState};
use adr_core::tracking::ProductionStep;
use adr_core::Graph;
use serde::Serialize;
use std::fmt;

/// Default oracle cap, in edges.
pub const DEFAULT_ISO_BOUND: usize = 4;
/// Node cap of every oracle run.
pub const MAX_ORACLE_NODES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    NotFound,
    Conflict,
    Invalid,
}

#[derive(Debug, Clone)]
pub struct OpError {
    pub kind: Kind,
    pub message: String,
}

impl OpError {
    pub fn not_found(m: impl Into<String>) -> Self {
        OpError {
            kind: Kind::NotFound,
            message: m.into(),
        }
    }
    pub fn conflict(m: impl Into<String>) -> Self {
        OpError {
            kind: Kind::Conflict,
            message: m.into(),
        }
    }
    pub fn invalid(m: impl ToString) -> Self {
        OpError {
            kind: Kind::Invalid,
            message: m.to_string(),
        }
    }
}

impl fmt::Display for OpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for OpError {}

fn number(s: &str, prefix: char) -> Option<u64> {
    s.strip_prefix(prefix).unwrap_or(s).parse().ok()
}

/// `e7`, `7`, or the name of an edge of `g`.
pub fn parse_edge(g: &Graph, s: &str) -> Result<EdgeId, OpError> {
    if let Some(e) = g.edge_named(s) {
        return Ok(e);
    }
    number(s, 'e')
        .map(EdgeId)
        .ok_or_else(|| OpError::invalid(format!("`{s}` is neither an edge id nor an edge name")))
}

/// `v7` or `7`.
pub fn parse_vertex(s: &str) -> Result<VertexId, OpError> {
    number(s, 'v')
        .map(VertexId)
        .ok_or_else(|| OpError::invalid(format!("`{s}` is not a vertex id")))
}

/// Oracle bounds with `edges` checked against the configured cap.
pub fn oracle_bounds(edges: usize, cap: usize) -> Result<Bounds, OpError> {
    if edges > cap {
        return Err(OpError::invalid(format!(
            "bound of {edges} edges exceeds the cap of {cap}"
        )));
    }
    Ok(Bounds {
        max_edges: edges,
        max_nodes: MAX_ORACLE_NODES,
    })
}

pub fn entry<'a>(ws: &'a Workspace, system: &str) -> Result<&'a SystemEntry, OpError> {
    ws.systems
        .get(system)
        .ok_or_else(|| OpError::not_found(format!("no system `{system}`")))
}

fn entry_mut<'a>(ws: &'a mut Workspace, system: &str) -> Result<&'a mut SystemEntry, OpError> {
    ws.systems
        .get_mut(system)
        .ok_or_else(|| OpError::not_found(format!("no system `{system}`")))
}

/// Productions and rules may not run beside an unfinished session: its
/// log must account for every later event. A finished session is detached.
fn detach_finished(e: &mut SystemEntry) -> Result<(), OpError> {
    match &e.session {
        Some(s) if !s.session.state.is_final() => Err(OpError::conflict(format!(
            "a recovery session is in progress (state {:?})",
            s.session.state
        ))),
        _ => {
            e.session = None;
            Ok(())
        }
    }
}

pub fn apply_production(
    ws: &mut Workspace,
    system: &str,
    production: &str,
    edge: &str,
) -> Result<ProductionStep, OpError> {
    if ws.style.production(production).is_none() {
        return Err(OpError::not_found(format!("no production `{production}`")));
    }
    let style = ws.style.clone();
    let e = entry_mut(ws, system)?;
    let edge = parse_edge(&e.system.graph, edge)?;
    let mut sys = e.system.clone();
    let step = sys
        .record_production(&style, production, edge)
        .map_err(OpError::invalid)?;
    detach_finished(e)?;
    e.system = sys;
    Ok(step)
}

pub fn rule_matches(ws: &Workspace, system: &str, rule: &str) -> Result<Vec<VertexId>, OpError> {
    let rho = ws
        .style
        .rule(rule)
        .ok_or_else(|| OpError::not_found(format!("no rule `{rule}`")))?;
    Ok(matches(&entry(ws, system)?.system, &ws.style, &rho.lhs))
}

/// Applies `rule` at `at`, or at its first match. Returns the new root.
pub fn apply_rule(ws: &mut Workspace, system: &str, rule: &str, at: Option<&str>) -> Result<VertexId, OpError> {
    let style = ws.style.clone();
    let rho = style
        .rule(rule)
        .ok_or_else(|| OpError::not_found(format!("no rule `{rule}`")))?;
    let e = entry_mut(ws, system)?;
    let mut sys = e.system.clone();
    let root = match at {
        Some(v) => apply_reconfiguration(&mut sys, &style, rho, parse_vertex(v)?),
        None => apply_anywhere(&mut sys, &style, rho),
    }
    .map_err(OpError::invalid)?;
    detach_finished(e)?;
    e.system = sys;
    Ok(root)
}

/// Starts a session on the system's current state. `invariant` defaults to
/// the workspace invariant.
pub fn start_recovery(ws: &mut Workspace, system: &str, invariant: Option<&str>) -> Result<SessionView, OpError> {
    let phi = match invariant {
        Some(text) => parse_formula(text, &ws.style.types).map_err(OpError::invalid)?,
        None => ws
            .invariant
            .clone()
            .ok_or_else(|| OpError::invalid("no invariant given and the workspace has none"))?,
    };
    let e = entry_mut(ws, system)?;
    if let Some(s) = &e.session {
        if !s.session.state.is_final() {
            return Err(OpError::conflict("a recovery session is already in progress"));
        }
    }
    let session = RecoverySession::start(&e.system, phi).map_err(OpError::invalid)?;
    e.session = Some(LiveSession {
        started_at: e.system.events.len(),
        session,
    });
    Ok(SessionView::of(e.session.as_ref().unwrap()))
}

fn recovery_error(e: RecoveryError) -> OpError {
    match e {
        RecoveryError::Stale { .. } => OpError::conflict(e.to_string()),
        _ => OpError::invalid(e),
    }
}

/// Applies one designer decision. Anything but `propose` on a violated
/// session requires an awaiting state.
pub fn decide(ws: &mut Workspace, system: &str, d: Decision) -> Result<SessionView, OpError> {
    let style = ws.style.clone();
    let e = entry_mut(ws, system)?;
    let live = e
        .session
        .as_mut()
        .ok_or_else(|| OpError::not_found(format!("system `{system}` has no recovery session")))?;
    let state = live.session.state;
    let allowed =
        state.is_awaiting() || (state == SessionState::Violated && matches!(d, Decision::Propose | Decision::Abandon));
    if !allowed {
        return Err(OpError::conflict(format!(
            "session is not awaiting a decision (state {state:?})"
        )));
    }
    live.session.decide(&mut e.system, &style, d).map_err(recovery_error)?;
    Ok(SessionView::of(live))
}

/// Drives the session to a final state.
pub fn run_auto(ws: &mut Workspace, system: &str) -> Result<SessionView, OpError> {
    let style = ws.style.clone();
    let e = entry_mut(ws, system)?;
    let live = e
        .session
        .as_mut()
        .ok_or_else(|| OpError::not_found(format!("system `{system}` has no recovery session")))?;
    let mut sys = e.system.clone();
    let mut session = live.session.clone();
    session.run_auto(&mut sys, &style).map_err(recovery_error)?;
    live.session = session;
    e.system = sys;
    Ok(SessionView::of(live))
}

pub fn session(ws: &Workspace, system: &str) -> Result<SessionView, OpError> {
    entry(ws, system)?
        .session
        .as_ref()
        .map(SessionView::of)
        .ok_or_else(|| OpError::not_found(format!("system `{system}` has no recovery session")))
}

/// What clients see of a recovery session.
#[derive(Clone, Debug, Serialize)]
pub struct SessionView {
    pub state: SessionState,
    pub invariant: String,
    pub condition: String,
    pub started_at: usize,
    pub candidates: Vec<Candidate>,
    pub subtrees: Vec<VertexId>,
    pub marked: Vec<VertexId>,
    pub witnesses: Vec<EdgeId>,
    pub pending: Vec<(String, EdgeId)>,
    pub decisions: Vec<Decision>,
}

impl SessionView {
    pub fn of(live: &LiveSession) -> Self {
        let s = &live.session;
        SessionView {
            state: s.state,
            invariant: s.invariant.to_string(),
            condition: s.condition.to_string(),
            started_at: live.started_at,
            candidates: s.candidates.clone(),
            subtrees: s.subtrees.clone(),
            marked: s.marked.clone(),
            witnesses: s.witnesses.clone(),
            pending: s.pending.clone(),
            decisions: s.decisions.clone(),
        }
    }
}

/// Parses a formula against the workspace's types.
pub fn formula(ws: &Workspace, text: &str) -> Result<Formula, OpError> {
    parse_formula(text, &ws.style.types).map_err(OpError::invalid)
}
