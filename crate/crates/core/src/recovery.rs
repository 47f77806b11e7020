//! Parsing back along the tracking forest, and recovery sessions that
//! steer a system which violates its style invariant back into the style.

use crate::graph::Graph;
use crate::ids::{EdgeId, IdGen, NodeId, VertexId};
use crate::logic::{satisfies, violation_witnesses, Assignment, Formula, LogicError};
use crate::production::{find_matches, match_at};
use crate::style::Style;
use crate::tracking::{EdgeRecord, Event, TrackedSystem, TrackingError};
use crate::wp::{weakest_precondition, Wp, WpError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseStepError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex {0} records no production")]
    NotInternal(VertexId),
    #[error("vertex {0} has a child that is not a leaf")]
    NotTwoTier(VertexId),
    #[error("unknown production `{0}`")]
    UnknownProduction(String),
    #[error("`{production}` has {expected} right-hand edges but {vertex} has {found} children")]
    Shape {
        production: String,
        vertex: VertexId,
        expected: usize,
        found: usize,
    },
    #[error("child {0} does not match its recorded edge in the graph")]
    Stale(VertexId),
    #[error("child edges do not match the right-hand side: {0}")]
    RhsMatch(String),
    #[error("edge {0} is not replaceable")]
    NotReplaceable(EdgeId),
}

/// How far the replaceability condition reaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// only the edges being folded must be replaceable
    #[default]
    Scoped,
    /// every edge of the graph must be replaceable
    Strict,
}

/// The result of folding a 2-tier subtree back into one edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parsed {
    pub graph: Graph,
    pub edge: EdgeId,
    pub production: String,
    pub folded: Vec<EdgeId>,
    pub record: EdgeRecord,
}

/// Folds the children of `vertex` back into a fresh left-hand edge of the
/// production recorded at `vertex`.
pub fn parse_step(
    sys: &TrackedSystem,
    style: &Style,
    vertex: VertexId,
    mode: ParseMode,
    ids: &mut IdGen,
) -> Result<Parsed, ParseStepError> {
    if !sys.forest.contains(vertex) {
        return Err(ParseStepError::UnknownVertex(vertex));
    }
    let name = sys.env.env2.get(&vertex).ok_or(ParseStepError::NotInternal(vertex))?;
    let p = style
        .production(name)
        .ok_or_else(|| ParseStepError::UnknownProduction(name.clone()))?;
    if sys.forest.children(vertex).iter().any(|c| !sys.forest.is_leaf(*c)) {
        return Err(ParseStepError::NotTwoTier(vertex));
    }
    let live = sys.live_children(vertex);
    if live.len() != p.rhs_order.len() {
        return Err(ParseStepError::Shape {
            production: p.name.clone(),
            vertex,
            expected: p.rhs_order.len(),
            found: live.len(),
        });
    }
    let g = &sys.graph;
    let mut sigma: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut folded = Vec::with_capacity(live.len());
    for (c, re) in live.iter().zip(&p.rhs_order) {
        let rec = sys.env.env1.get(c).ok_or(ParseStepError::Stale(*c))?;
        let edge = g.edge(rec.edge).ok_or(ParseStepError::Stale(*c))?;
        if edge.ty != rec.ty || edge.tentacles != rec.nodes {
            return Err(ParseStepError::Stale(*c));
        }
        let r = p.rhs.edge(*re).unwrap();
        if r.ty != edge.ty {
            return Err(ParseStepError::RhsMatch(format!(
                "child {c} has type {} where {} is expected",
                edge.ty, r.ty
            )));
        }
        for (rn, gn) in r.tentacles.iter().zip(&edge.tentacles) {
            if let Some(prev) = sigma.insert(*rn, *gn) {
                if prev != *gn {
                    return Err(ParseStepError::RhsMatch(format!(
                        "right-hand node {rn} is matched to both {prev} and {gn}"
                    )));
                }
            }
        }
        folded.push(rec.edge);
    }
    let internal = p.internal_nodes();
    for n in &internal {
        if let Some(gn) = sigma.get(n) {
            if sigma.iter().filter(|(_, v)| *v == gn).count() > 1 {
                return Err(ParseStepError::RhsMatch(format!(
                    "internal node {n} is glued to another node"
                )));
            }
        }
    }
    match mode {
        ParseMode::Scoped => {
            if let Some(e) = folded.iter().find(|e| !g.theta(**e)) {
                return Err(ParseStepError::NotReplaceable(*e));
            }
        }
        ParseMode::Strict => {
            if let Some(e) = g.edge_ids().find(|e| !g.theta(*e)) {
                return Err(ParseStepError::NotReplaceable(e));
            }
        }
    }
    let (_, le) = p.lhs_edge();
    let parent = sys.env.env1.get(&vertex);
    let mut nodes = Vec::with_capacity(le.tentacles.len());
    for (k, l) in le.tentacles.iter().enumerate() {
        let r = p.interface[l];
        let n = match sigma.get(&r) {
            Some(n) => *n,
            None => *parent
                .and_then(|rec| rec.nodes.get(k))
                .ok_or_else(|| ParseStepError::RhsMatch(format!("no node for left-hand tentacle {k}")))?,
        };
        let want = &p.lhs.node(*l).unwrap().ty;
        if g.node(n).map(|x| &x.ty) != Some(want) {
            return Err(ParseStepError::RhsMatch(format!("node {n} is not of type {want}")));
        }
        nodes.push(n);
    }
    let mut out = g.without_edges(&folded);
    let attached = out.attached_nodes();
    for r in &internal {
        if let Some(n) = sigma.get(r) {
            if !attached.contains(n) && !nodes.contains(n) {
                out.remove_node(*n);
            }
        }
    }
    let edge = ids.edge();
    out.add_edge(edge, p.lhs_type(), nodes.clone(), true);
    Ok(Parsed {
        graph: out,
        edge,
        production: p.name.clone(),
        folded,
        record: EdgeRecord {
            edge,
            ty: p.lhs_type().to_string(),
            nodes,
        },
    })
}

/// [`parse_step`] on a tracked system: `vertex` becomes a leaf standing
/// for the new edge.
pub fn parse_tracked(
    sys: &mut TrackedSystem,
    style: &Style,
    vertex: VertexId,
    mode: ParseMode,
) -> Result<EdgeId, ParseStepError> {
    let mut ids = sys.ids.clone();
    let parsed = parse_step(sys, style, vertex, mode, &mut ids)?;
    for c in sys.forest.prune(vertex) {
        sys.env.env1.remove(&c);
        sys.env.env2.remove(&c);
        sys.env.synthetic.remove(&c);
    }
    sys.env.env2.remove(&vertex);
    sys.env.synthetic.remove(&vertex);
    sys.env.env1.insert(vertex, parsed.record);
    sys.graph = parsed.graph;
    sys.ids = ids;
    sys.events.push(Event::Parse { vertex });
    Ok(parsed.edge)
}

/// Vertices under `roots` whose children are all leaves standing for
/// replaceable edges (or a single tombstone).
pub fn parseable_subtrees(sys: &TrackedSystem, roots: &[VertexId]) -> Vec<VertexId> {
    let mut out = Vec::new();
    for r in roots {
        for v in sys.forest.subtree(*r) {
            if !sys.env.env2.contains_key(&v) {
                continue;
            }
            let kids = sys.forest.children(v);
            let ok = kids.iter().all(|c| {
                sys.forest.is_leaf(*c)
                    && (sys.is_tombstone(*c)
                        || sys
                            .env
                            .env1
                            .get(c)
                            .is_some_and(|rec| sys.graph.has_edge(rec.edge) && sys.graph.theta(rec.edge)))
            });
            if ok && !out.contains(&v) {
                out.push(v);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Violated,
    AwaitingProductionChoice,
    AwaitingIterateOrParse,
    AwaitingSubtreeChoice,
    Recovered,
    Abandoned,
}

impl SessionState {
    pub fn is_awaiting(self) -> bool {
        matches!(
            self,
            SessionState::AwaitingProductionChoice
                | SessionState::AwaitingIterateOrParse
                | SessionState::AwaitingSubtreeChoice
        )
    }

    pub fn is_final(self) -> bool {
        matches!(self, SessionState::Recovered | SessionState::Abandoned)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    /// computes candidates; logged so a replay reaches the same state
    Propose,
    AcceptProduction {
        production: String,
        edge: EdgeId,
    },
    Iterate {
        production: String,
        edge: EdgeId,
    },
    RequestParse,
    Parse {
        vertex: VertexId,
    },
    Abandon,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub production: String,
    pub edge: EdgeId,
    /// the precondition, printed
    pub precondition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecoveryError {
    #[error("`{decision}` is not allowed in state {state:?}")]
    Stale { decision: String, state: SessionState },
    #[error("({production}, {edge}) is not among the candidates")]
    NotACandidate { production: String, edge: EdgeId },
    #[error("unknown production `{0}`")]
    UnknownProduction(String),
    #[error("vertex {0} is not a parseable subtree of the marked region")]
    NotParseable(VertexId),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Wp(#[from] WpError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Parse(#[from] ParseStepError),
    #[error(transparent)]
    Production(#[from] crate::production::ProductionError),
}

/// A recovery session over one tracked system. The system itself is
/// passed to each operation; the session never owns it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecoverySession {
    pub invariant: Formula,
    pub state: SessionState,
    pub working_graph: Graph,
    pub condition: Formula,
    /// left-hand variables bound by earlier iterations
    pub assignment: Assignment,
    /// productions chosen by `Iterate`, in push order
    pub pending: Vec<(String, EdgeId)>,
    /// roots of the region reshaped by the last reconfiguration
    pub marked: Vec<VertexId>,
    pub candidates: Vec<Candidate>,
    pub subtrees: Vec<VertexId>,
    pub decisions: Vec<Decision>,
    /// edges at which the invariant fails
    pub witnesses: Vec<EdgeId>,
    cache: BTreeMap<(String, String), Wp>,
}

/// Roots of the subtree built by the most recent reconfiguration, or all
/// roots when the log has none.
pub fn marked_region(sys: &TrackedSystem) -> Vec<VertexId> {
    sys.events
        .iter()
        .rev()
        .find_map(|e| match e {
            Event::Reconfiguration { result, .. } if sys.forest.contains(*result) => Some(vec![*result]),
            _ => None,
        })
        .unwrap_or_else(|| sys.forest.roots().to_vec())
}

impl RecoverySession {
    /// Rebuilds the graph from the forest, marks the reconfigured region and
    /// checks the invariant.
    pub fn start(sys: &TrackedSystem, invariant: Formula) -> Result<Self, RecoveryError> {
        let g = sys.current_graph()?;
        let mut s = RecoverySession {
            invariant: invariant.clone(),
            state: SessionState::Idle,
            working_graph: g,
            condition: invariant,
            assignment: Assignment::new(),
            pending: Vec::new(),
            marked: marked_region(sys),
            candidates: Vec::new(),
            subtrees: Vec::new(),
            decisions: Vec::new(),
            witnesses: Vec::new(),
            cache: BTreeMap::new(),
        };
        s.recheck(sys)?;
        Ok(s)
    }

    fn recheck(&mut self, sys: &TrackedSystem) -> Result<(), RecoveryError> {
        self.working_graph = sys.graph.clone();
        self.condition = self.invariant.clone();
        self.assignment = Assignment::new();
        self.pending.clear();
        self.candidates.clear();
        self.subtrees.clear();
        let empty = Assignment::new();
        if satisfies(&sys.graph, &self.invariant, &empty)? {
            self.witnesses.clear();
            self.state = SessionState::Recovered;
        } else {
            self.witnesses = violation_witnesses(&sys.graph, &self.invariant, &empty)?;
            self.state = SessionState::Violated;
        }
        Ok(())
    }

    fn wp(&mut self, style: &Style, production: &str) -> Result<Wp, RecoveryError> {
        let key = (production.to_string(), self.condition.to_string());
        if let Some(w) = self.cache.get(&key) {
            return Ok(w.clone());
        }
        let p = style
            .production(production)
            .ok_or_else(|| RecoveryError::UnknownProduction(production.to_string()))?;
        let w = weakest_precondition(p, &self.condition, &BTreeMap::new(), &style.types)?;
        self.cache.insert(key, w.clone());
        Ok(w)
    }

    fn compute_candidates(&mut self, style: &Style) -> Result<Vec<Candidate>, RecoveryError> {
        let mut out = Vec::new();
        let names: Vec<String> = style.productions().map(|p| p.name.clone()).collect();
        for name in names {
            let w = self.wp(style, &name)?;
            let p = style.production(&name).unwrap();
            for m in find_matches(&self.working_graph, p) {
                let residual = self.working_graph.without_edges(&[m.edge]);
                let mut h = self.assignment.clone();
                h.extend(&w.assignment(p, &m));
                if satisfies(&residual, &w.formula, &h)? {
                    out.push(Candidate {
                        production: name.clone(),
                        edge: m.edge,
                        precondition: w.formula.to_string(),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Candidate productions for the working graph and condition.
    pub fn propose(&mut self, style: &Style) -> Result<&[Candidate], RecoveryError> {
        if !matches!(
            self.state,
            SessionState::Violated | SessionState::AwaitingIterateOrParse | SessionState::AwaitingProductionChoice
        ) {
            return Err(RecoveryError::Stale {
                decision: "propose".into(),
                state: self.state,
            });
        }
        self.candidates = self.compute_candidates(style)?;
        self.state = if self.candidates.is_empty() {
            SessionState::AwaitingIterateOrParse
        } else {
            SessionState::AwaitingProductionChoice
        };
        self.decisions.push(Decision::Propose);
        Ok(&self.candidates)
    }

    fn stale(&self, d: &Decision) -> RecoveryError {
        RecoveryError::Stale {
            decision: format!("{d:?}"),
            state: self.state,
        }
    }

    /// Applies a designer decision. On error neither the session nor the
    /// system changes.
    pub fn decide(&mut self, sys: &mut TrackedSystem, style: &Style, d: Decision) -> Result<(), RecoveryError> {
        let mut next = self.clone();
        let mut nsys = sys.clone();
        next.apply(&mut nsys, style, &d)?;
        *self = next;
        *sys = nsys;
        Ok(())
    }

    fn apply(&mut self, sys: &mut TrackedSystem, style: &Style, d: &Decision) -> Result<(), RecoveryError> {
        match d {
            Decision::Propose => {
                self.propose(style)?;
                return Ok(());
            }
            Decision::AcceptProduction { production, edge } => {
                if self.state != SessionState::AwaitingProductionChoice {
                    return Err(self.stale(d));
                }
                let canonical = style
                    .production(production)
                    .ok_or_else(|| RecoveryError::UnknownProduction(production.clone()))?
                    .name
                    .clone();
                if !self
                    .candidates
                    .iter()
                    .any(|c| c.production == canonical && c.edge == *edge)
                {
                    return Err(RecoveryError::NotACandidate {
                        production: production.clone(),
                        edge: *edge,
                    });
                }
                sys.record_production(style, &canonical, *edge)?;
                for (p, e) in self.pending.clone().iter().rev() {
                    sys.record_production(style, p, *e)?;
                }
                self.recheck(sys)?;
            }
            Decision::Iterate { production, edge } => {
                if !matches!(
                    self.state,
                    SessionState::AwaitingProductionChoice | SessionState::AwaitingIterateOrParse
                ) {
                    return Err(self.stale(d));
                }
                let p = style
                    .production(production)
                    .ok_or_else(|| RecoveryError::UnknownProduction(production.clone()))?;
                let canonical = p.name.clone();
                let m = match_at(&self.working_graph, p, *edge)?;
                let w = self.wp(style, &canonical)?;
                self.assignment.extend(&w.assignment(p, &m));
                self.working_graph = self.working_graph.without_edges(&[*edge]);
                self.condition = w.formula;
                self.pending.push((canonical, *edge));
                self.candidates = self.compute_candidates(style)?;
                self.state = if self.candidates.is_empty() {
                    SessionState::AwaitingIterateOrParse
                } else {
                    SessionState::AwaitingProductionChoice
                };
            }
            Decision::RequestParse => {
                if !self.state.is_awaiting() {
                    return Err(self.stale(d));
                }
                self.subtrees = parseable_subtrees(sys, &self.marked);
                self.state = SessionState::AwaitingSubtreeChoice;
            }
            Decision::Parse { vertex } => {
                if !self.state.is_awaiting() {
                    return Err(self.stale(d));
                }
                if !parseable_subtrees(sys, &self.marked).contains(vertex) {
                    return Err(RecoveryError::NotParseable(*vertex));
                }
                parse_tracked(sys, style, *vertex, ParseMode::Scoped)?;
                self.recheck(sys)?;
                if self.state == SessionState::Violated {
                    self.candidates = self.compute_candidates(style)?;
                    self.state = if self.candidates.is_empty() {
                        SessionState::AwaitingIterateOrParse
                    } else {
                        SessionState::AwaitingProductionChoice
                    };
                }
            }
            Decision::Abandon => {
                if !(self.state == SessionState::Violated || self.state.is_awaiting()) {
                    return Err(self.stale(d));
                }
                self.state = SessionState::Abandoned;
            }
        }
        self.decisions.push(d.clone());
        Ok(())
    }

    /// Re-runs a decision log from a fresh session.
    pub fn replay(
        sys: &mut TrackedSystem,
        style: &Style,
        invariant: Formula,
        decisions: &[Decision],
    ) -> Result<Self, RecoveryError> {
        let mut s = RecoverySession::start(sys, invariant)?;
        for d in decisions {
            s.decide(sys, style, d.clone())?;
        }
        Ok(s)
    }

    /// Drives the session to a final state without a designer: accept the
    /// first candidate; otherwise look (on copies) for an iteration of at
    /// most two steps, then a parse inside the marked region, that leads
    /// to candidates; otherwise abandon.
    pub fn run_auto(&mut self, sys: &mut TrackedSystem, style: &Style) -> Result<(), RecoveryError> {
        for _ in 0..32 {
            if self.state.is_final() {
                return Ok(());
            }
            if self.state == SessionState::Violated {
                self.decide(sys, style, Decision::Propose)?;
                continue;
            }
            if let Some(c) = self.candidates.first().cloned() {
                if self.state == SessionState::AwaitingProductionChoice {
                    self.decide(
                        sys,
                        style,
                        Decision::AcceptProduction {
                            production: c.production,
                            edge: c.edge,
                        },
                    )?;
                    continue;
                }
            }
            match self.search(sys, style, 2)? {
                Some(path) => {
                    for d in path {
                        self.decide(sys, style, d)?;
                    }
                }
                None => {
                    self.decide(sys, style, Decision::Abandon)?;
                }
            }
        }
        if !self.state.is_final() {
            self.decide(sys, style, Decision::Abandon)?;
        }
        Ok(())
    }

    /// A short decision sequence, tried on copies, after which there are
    /// candidates (or the system is recovered).
    fn search(&self, sys: &TrackedSystem, style: &Style, depth: usize) -> Result<Option<Vec<Decision>>, RecoveryError> {
        let mut frontier: Vec<(RecoverySession, Vec<Decision>)> = vec![(self.clone(), vec![])];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (s, path) in &frontier {
                for p in style.productions() {
                    for m in find_matches(&s.working_graph, p) {
                        let d = Decision::Iterate {
                            production: p.name.clone(),
                            edge: m.edge,
                        };
                        let mut t = s.clone();
                        let mut tsys = sys.clone();
                        if t.decide(&mut tsys, style, d.clone()).is_err() {
                            continue;
                        }
                        let mut path = path.clone();
                        path.push(d);
                        if !t.candidates.is_empty() {
                            return Ok(Some(path));
                        }
                        next.push((t, path));
                    }
                }
            }
            frontier = next;
        }
        for v in parseable_subtrees(sys, &self.marked) {
            let d = Decision::Parse { vertex: v };
            let mut t = self.clone();
            let mut tsys = sys.clone();
            if t.decide(&mut tsys, style, d.clone()).is_ok()
                && (t.state == SessionState::Recovered || !t.candidates.is_empty())
            {
                return Ok(Some(vec![d]));
            }
        }
        Ok(None)
    }
}

/// What is needed to rebuild a session: the invariant, how many events of
/// the system preceded it, and the decisions taken.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLog {
    pub invariant: Formula,
    pub started_at: usize,
    pub decisions: Vec<Decision>,
}

impl SessionLog {
    /// Replays the first `started_at` events, then the decisions.
    pub fn replay(
        &self,
        initial: Graph,
        id_base: u64,
        events: &[Event],
        style: &Style,
    ) -> Result<(TrackedSystem, RecoverySession), RecoveryError> {
        let prefix = events.get(..self.started_at).ok_or(TrackingError::Diverged {
            index: events.len(),
            detail: format!("session starts after event {}", self.started_at),
        })?;
        let mut sys = TrackedSystem::replay(initial, id_base, prefix, style)?;
        let s = RecoverySession::replay(&mut sys, style, self.invariant.clone(), &self.decisions)?;
        Ok((sys, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::iso::isomorphic;
    use crate::production::apply_production;

    #[test]
    fn example14_parse_inverts_both_steps() {
        let fx = fixtures::example14();
        let s2 = &fx.system;
        let x = s2.forest.roots()[0];
        let x2 = s2.forest.children(x)[1];
        let mut s = s2.clone();
        let e = parse_tracked(&mut s, &fx.style, x2, ParseMode::Scoped).unwrap();
        assert!(isomorphic(&s.graph, &fx.snapshots[1].graph, true));
        // re-applying the recorded production gives back G2
        let p = fx.style.production("browseFlights").unwrap();
        let mut ids = s.ids.clone();
        let again = apply_production(&s.graph, p, &match_at(&s.graph, p, e).unwrap(), &mut ids).unwrap();
        assert!(isomorphic(&again.graph, &s2.graph, true));
        s.check_integrity().unwrap();
        parse_tracked(&mut s, &fx.style, x, ParseMode::Scoped).unwrap();
        assert!(isomorphic(&s.graph, &fx.snapshots[0].graph, true));
        assert_eq!(s.forest.len(), 1);
        s.check_integrity().unwrap();
    }

    #[test]
    fn parse_refuses_non_replaceable_children() {
        let fx = fixtures::example14();
        let mut s = fx.system.clone();
        let x2 = s.forest.children(s.forest.roots()[0])[1];
        s.graph.set_theta(fx.edge("f3"), false);
        let before = s.clone();
        assert_eq!(
            parse_tracked(&mut s, &fx.style, x2, ParseMode::Scoped),
            Err(ParseStepError::NotReplaceable(fx.edge("f3")))
        );
        assert_eq!(s, before);
    }

    #[test]
    fn strict_mode_looks_at_the_whole_graph() {
        let fx = fixtures::example16();
        let s = &fx.system;
        let root = s.forest.roots()[0];
        let first = s.forest.children(root)[0];
        let mut ids = s.ids.clone();
        // the client edge is not replaceable, so strict parsing refuses
        assert!(matches!(
            parse_step(s, &fx.style, first, ParseMode::Strict, &mut ids),
            Err(ParseStepError::NotReplaceable(_))
        ));
        assert!(parse_step(s, &fx.style, first, ParseMode::Scoped, &mut ids).is_ok());
    }

    #[test]
    fn parse_needs_a_two_tier_subtree() {
        let fx = fixtures::example14();
        let root = fx.system.forest.roots()[0];
        let mut ids = fx.system.ids.clone();
        assert_eq!(
            parse_step(&fx.system, &fx.style, root, ParseMode::Scoped, &mut ids),
            Err(ParseStepError::NotTwoTier(root))
        );
    }

    #[test]
    fn bad_server_is_recovered_by_good_server() {
        let fx = fixtures::example16();
        let mut sys = fx.system.clone();
        let mut s = RecoverySession::start(&sys, fx.invariant.clone()).unwrap();
        assert_eq!(s.state, SessionState::Violated);
        assert_eq!(s.marked.len(), 1);
        let cands = s.propose(&fx.style).unwrap().to_vec();
        let f = fx.edge("f");
        assert!(cands.iter().any(|c| c.production == "goodServer" && c.edge == f));
        s.decide(
            &mut sys,
            &fx.style,
            Decision::AcceptProduction {
                production: "goodServer".into(),
                edge: f,
            },
        )
        .unwrap();
        assert_eq!(s.state, SessionState::Recovered);
        assert!(satisfies(&sys.graph, &fx.invariant, &Assignment::new()).unwrap());
        sys.check_integrity().unwrap();
    }

    #[test]
    fn satisfied_invariant_is_recovered_at_once() {
        let fx = fixtures::example16();
        let s = RecoverySession::start(&fx.snapshots[3], fx.invariant.clone()).unwrap();
        assert_eq!(s.state, SessionState::Recovered);
        let s = RecoverySession::start(&fx.system, Formula::Top).unwrap();
        assert_eq!(s.state, SessionState::Recovered);
    }

    #[test]
    fn decisions_out_of_turn_are_stale() {
        let fx = fixtures::example16();
        let mut sys = fx.system.clone();
        let mut s = RecoverySession::start(&sys, fx.invariant.clone()).unwrap();
        let d = Decision::AcceptProduction {
            production: "goodServer".into(),
            edge: fx.edge("f"),
        };
        assert!(matches!(
            s.decide(&mut sys, &fx.style, d),
            Err(RecoveryError::Stale { .. })
        ));
        s.decide(&mut sys, &fx.style, Decision::Abandon).unwrap();
        assert_eq!(s.state, SessionState::Abandoned);
        assert!(s.decide(&mut sys, &fx.style, Decision::Abandon).is_err());
    }

    #[test]
    fn two_step_chain_needs_an_iteration() {
        let fx = fixtures::two_servers();
        let mut sys = fx.system.clone();
        let mut s = RecoverySession::start(&sys, fx.invariant.clone()).unwrap();
        assert!(s.propose(&fx.style).unwrap().is_empty());
        assert_eq!(s.state, SessionState::AwaitingIterateOrParse);
        s.decide(
            &mut sys,
            &fx.style,
            Decision::Iterate {
                production: "goodServer".into(),
                edge: fx.edge("f1"),
            },
        )
        .unwrap();
        assert_eq!(s.state, SessionState::AwaitingProductionChoice);
        let c = s.candidates[0].clone();
        assert_eq!((c.production.as_str(), c.edge), ("goodServer", fx.edge("f2")));
        s.decide(
            &mut sys,
            &fx.style,
            Decision::AcceptProduction {
                production: c.production,
                edge: c.edge,
            },
        )
        .unwrap();
        assert_eq!(s.state, SessionState::Recovered);
        assert_eq!(sys.graph.edges_of_type("S").count(), 2);
    }

    #[test]
    fn parse_decision_resets_the_condition() {
        let fx = fixtures::example16();
        let mut sys = fx.system.clone();
        let mut s = RecoverySession::start(&sys, fx.invariant.clone()).unwrap();
        s.decide(&mut sys, &fx.style, Decision::Propose).unwrap();
        s.decide(&mut sys, &fx.style, Decision::RequestParse).unwrap();
        assert_eq!(s.state, SessionState::AwaitingSubtreeChoice);
        let v = s.subtrees[0];
        s.decide(&mut sys, &fx.style, Decision::Parse { vertex: v }).unwrap();
        assert_eq!(s.condition, fx.invariant);
        assert!(s.pending.is_empty());
        sys.check_integrity().unwrap();
    }

    #[test]
    fn auto_mode_finishes() {
        for fx in [fixtures::example16(), fixtures::two_servers()] {
            let mut sys = fx.system.clone();
            let mut s = RecoverySession::start(&sys, fx.invariant.clone()).unwrap();
            s.run_auto(&mut sys, &fx.style).unwrap();
            assert_eq!(s.state, SessionState::Recovered);
        }
    }

    #[test]
    fn replaying_decisions_reproduces_the_session() {
        let fx = fixtures::two_servers();
        let mut sys = fx.system.clone();
        let mut s = RecoverySession::start(&sys, fx.invariant.clone()).unwrap();
        s.run_auto(&mut sys, &fx.style).unwrap();
        let mut again_sys = fx.system.clone();
        let again = RecoverySession::replay(&mut again_sys, &fx.style, fx.invariant.clone(), &s.decisions).unwrap();
        assert_eq!(again.state, s.state);
        assert_eq!(again.decisions, s.decisions);
        assert_eq!(again_sys, sys);
    }
}
