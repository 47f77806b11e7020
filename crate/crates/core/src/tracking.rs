//! Tracking forests: one derivation tree per edge of the initial graph,
//! kept in lockstep with the current graph. Leaves with an edge record are
//! in bijection with the current edges.

use crate::graph::Graph;
use crate::ids::{EdgeId, IdGen, NodeId, VertexId};
use crate::production::{apply_production, match_at, ProductionError};
use crate::reconfig::ReconfigError;
use crate::recovery::ParseStepError;
use crate::style::Style;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use thiserror::Error;

/// `𝒯⁽¹⁾` entry: an edge (current or historical) with its type and nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub edge: EdgeId,
    #[serde(rename = "tau")]
    pub ty: String,
    #[serde(rename = "t")]
    pub nodes: Vec<NodeId>,
}

impl EdgeRecord {
    pub fn of(g: &Graph, edge: EdgeId) -> Option<Self> {
        let e = g.edge(edge)?;
        Some(EdgeRecord {
            edge,
            ty: e.ty.clone(),
            nodes: e.tentacles.clone(),
        })
    }

    /// `f(u1,u2)`, using display names from `g` where it knows them.
    pub fn label(&self, g: &Graph) -> String {
        let name = if g.has_edge(self.edge) {
            g.edge_label(self.edge)
        } else {
            self.edge.to_string()
        };
        let nodes: Vec<String> = self.nodes.iter().map(|n| node_label(g, *n)).collect();
        format!("{name}({})", nodes.join(","))
    }
}

fn node_label(g: &Graph, n: NodeId) -> String {
    if g.has_node(n) {
        g.node_label(n)
    } else {
        n.to_string()
    }
}

/// Rooted ordered trees over vertex ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forest {
    parent: BTreeMap<VertexId, Option<VertexId>>,
    children: BTreeMap<VertexId, Vec<VertexId>>,
    roots: Vec<VertexId>,
}

impl Forest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_root(&mut self, v: VertexId) {
        self.parent.insert(v, None);
        self.children.insert(v, Vec::new());
        self.roots.push(v);
    }

    pub fn add_child(&mut self, parent: VertexId, v: VertexId) {
        self.parent.insert(v, Some(parent));
        self.children.insert(v, Vec::new());
        self.children.get_mut(&parent).expect("parent is in the forest").push(v);
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.parent.contains_key(&v)
    }

    pub fn roots(&self) -> &[VertexId] {
        &self.roots
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent.get(&v).copied().flatten()
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        self.children.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.children(v).is_empty()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.parent.keys().copied()
    }

    /// The root of the tree containing `v`.
    pub fn root_of(&self, mut v: VertexId) -> VertexId {
        while let Some(p) = self.parent(v) {
            v = p;
        }
        v
    }

    /// Preorder of the subtree at `v`.
    pub fn subtree(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.children(x).iter().rev());
        }
        out
    }

    /// Preorder over all trees in root order.
    pub fn preorder(&self) -> Vec<VertexId> {
        self.roots.iter().flat_map(|r| self.subtree(*r)).collect()
    }

    pub fn leaves_under(&self, v: VertexId) -> Vec<VertexId> {
        self.subtree(v).into_iter().filter(|x| self.is_leaf(*x)).collect()
    }

    /// Removes the subtree at `v` and returns its vertices. The slot `v`
    /// occupied in its parent (or the root list) is left to `replace`.
    fn detach_descendants(&mut self, v: VertexId) -> Vec<VertexId> {
        let gone = self.subtree(v);
        for x in &gone[1..] {
            self.parent.remove(x);
            self.children.remove(x);
        }
        self.children.insert(v, Vec::new());
        gone[1..].to_vec()
    }

    /// Removes every child (and descendant) of `v`.
    pub fn prune(&mut self, v: VertexId) -> Vec<VertexId> {
        self.detach_descendants(v)
    }

    /// Puts `new` (already a vertex, detached from any parent) into the slot
    /// of `old`; `old`'s subtree is removed, except vertices in `keep`.
    pub(crate) fn replace_subtree(&mut self, old: VertexId, new: VertexId, keep: &BTreeSet<VertexId>) {
        let parent = self.parent(old);
        for x in self.subtree(old) {
            if !keep.contains(&x) && x != new {
                self.parent.remove(&x);
                self.children.remove(&x);
            }
        }
        match parent {
            Some(p) => {
                let slot = self.children.get_mut(&p).unwrap();
                let i = slot.iter().position(|c| *c == old).unwrap();
                slot[i] = new;
            }
            None => {
                let i = self.roots.iter().position(|c| *c == old).unwrap();
                self.roots[i] = new;
            }
        }
        self.parent.insert(new, parent);
    }

    /// Adds `v` as a detached vertex (no parent, not a root yet).
    pub(crate) fn add_detached(&mut self, v: VertexId) {
        self.parent.insert(v, None);
        self.children.insert(v, Vec::new());
    }

    /// Moves an existing vertex (with its subtree) under `parent`.
    pub(crate) fn attach(&mut self, parent: VertexId, v: VertexId) {
        if let Some(Some(old)) = self.parent.get(&v).copied() {
            self.children.get_mut(&old).unwrap().retain(|c| *c != v);
        }
        self.parent.insert(v, Some(parent));
        self.children.get_mut(&parent).unwrap().push(v);
    }
}

/// The pair of partial maps `𝒯⁽¹⁾`, `𝒯⁽²⁾`. Vertices in neither map are
/// tombstones left by empty right-hand sides; `synthetic` marks edge
/// records invented for vertices created by reconfiguration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrackingEnv {
    pub env1: BTreeMap<VertexId, EdgeRecord>,
    pub env2: BTreeMap<VertexId, String>,
    pub synthetic: BTreeSet<VertexId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Production {
        production: String,
        edge: EdgeId,
    },
    Reconfiguration {
        rule: String,
        vertex: VertexId,
        result: VertexId,
    },
    Parse {
        vertex: VertexId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackingError {
    #[error("id base {base} does not exceed the largest id {max} of the initial graph")]
    IdBase { base: u64, max: u64 },
    #[error("unknown production `{0}`")]
    UnknownProduction(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("no leaf of the forest records edge {0}")]
    NoLeafForEdge(EdgeId),
    #[error("integrity: {0}")]
    Integrity(String),
    #[error(transparent)]
    Production(#[from] ProductionError),
    #[error(transparent)]
    Reconfig(#[from] Box<ReconfigError>),
    #[error(transparent)]
    Parse(#[from] ParseStepError),
    #[error("replayed event {index} diverged: {detail}")]
    Diverged { index: usize, detail: String },
}

impl From<ReconfigError> for TrackingError {
    fn from(e: ReconfigError) -> Self {
        TrackingError::Reconfig(Box::new(e))
    }
}

/// A graph together with its tracking forest, environment and event log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackedSystem {
    pub graph: Graph,
    pub forest: Forest,
    pub env: TrackingEnv,
    pub events: Vec<Event>,
    pub ids: IdGen,
    initial: Graph,
    id_base: u64,
}

/// What [`TrackedSystem::record_production`] did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductionStep {
    pub vertex: VertexId,
    pub children: Vec<VertexId>,
    pub created: Vec<EdgeId>,
}

impl TrackedSystem {
    /// One single-vertex tree per edge of `g0`, in edge order. Fresh ids are
    /// issued from `id_base`, which must exceed every id in `g0`.
    pub fn init(g0: Graph, id_base: u64) -> Result<Self, TrackingError> {
        let max = g0.max_id();
        if id_base <= max {
            return Err(TrackingError::IdBase { base: id_base, max });
        }
        let mut ids = IdGen::starting_at(id_base);
        let mut forest = Forest::new();
        let mut env = TrackingEnv::default();
        for (e, _) in g0.edges() {
            let v = ids.vertex();
            forest.add_root(v);
            env.env1.insert(v, EdgeRecord::of(&g0, e).unwrap());
        }
        Ok(TrackedSystem {
            graph: g0.clone(),
            forest,
            env,
            events: Vec::new(),
            ids,
            initial: g0,
            id_base,
        })
    }

    pub fn initial(&self) -> &Graph {
        &self.initial
    }

    pub fn id_base(&self) -> u64 {
        self.id_base
    }

    pub fn is_tombstone(&self, v: VertexId) -> bool {
        self.forest.contains(v) && !self.env.env1.contains_key(&v) && !self.env.env2.contains_key(&v)
    }

    /// Children of `v` that are not tombstones.
    pub fn live_children(&self, v: VertexId) -> Vec<VertexId> {
        self.forest
            .children(v)
            .iter()
            .copied()
            .filter(|c| !self.is_tombstone(*c))
            .collect()
    }

    /// Leaves standing for current edges, in forest preorder.
    pub fn edge_leaves(&self) -> Vec<VertexId> {
        self.forest
            .preorder()
            .into_iter()
            .filter(|v| self.forest.is_leaf(*v) && self.env.env1.contains_key(v))
            .collect()
    }

    /// Edge leaves below `v`.
    pub fn edge_leaves_under(&self, v: VertexId) -> Vec<VertexId> {
        self.forest
            .leaves_under(v)
            .into_iter()
            .filter(|x| self.env.env1.contains_key(x))
            .collect()
    }

    pub fn leaf_for_edge(&self, e: EdgeId) -> Option<VertexId> {
        self.forest
            .vertices()
            .find(|v| self.forest.is_leaf(*v) && self.env.env1.get(v).is_some_and(|r| r.edge == e))
    }

    /// Applies `production` at `edge` and grows the tree under the leaf
    /// recording that edge. On error the system is unchanged.
    pub fn record_production(
        &mut self,
        style: &Style,
        production: &str,
        edge: EdgeId,
    ) -> Result<ProductionStep, TrackingError> {
        let p = style
            .production(production)
            .ok_or_else(|| TrackingError::UnknownProduction(production.to_string()))?;
        let m = match_at(&self.graph, p, edge)?;
        let leaf = self.leaf_for_edge(edge).ok_or(TrackingError::NoLeafForEdge(edge))?;
        let mut ids = self.ids.clone();
        let app = apply_production(&self.graph, p, &m, &mut ids)?;
        let mut children = Vec::new();
        if app.created.is_empty() {
            let t = ids.vertex();
            self.forest.add_child(leaf, t);
            children.push(t);
        }
        for e in &app.created {
            let v = ids.vertex();
            self.forest.add_child(leaf, v);
            self.env.env1.insert(v, EdgeRecord::of(&app.graph, *e).unwrap());
            children.push(v);
        }
        self.env.env2.insert(leaf, p.name.clone());
        self.graph = app.graph;
        self.ids = ids;
        self.events.push(Event::Production {
            production: p.name.clone(),
            edge,
        });
        Ok(ProductionStep {
            vertex: leaf,
            children,
            created: app.created,
        })
    }

    /// Rebuilds the graph from the edge leaves (nodes and replaceability
    /// from the stored graph) and checks it against the stored graph.
    pub fn current_graph(&self) -> Result<Graph, TrackingError> {
        let mut g = Graph::new();
        for (n, node) in self.graph.nodes() {
            g.insert_node(n, node.clone());
        }
        let mut seen = BTreeSet::new();
        for v in self.edge_leaves() {
            let r = &self.env.env1[&v];
            if !seen.insert(r.edge) {
                return Err(TrackingError::Integrity(format!(
                    "edge {} recorded by two leaves",
                    r.edge
                )));
            }
            let Some(edge) = self.graph.edge(r.edge) else {
                return Err(TrackingError::Integrity(format!(
                    "leaf {v} records missing edge {}",
                    r.edge
                )));
            };
            if edge.ty != r.ty || edge.tentacles != r.nodes {
                return Err(TrackingError::Integrity(format!(
                    "leaf {v} records {}{:?} but the graph has {}{:?}",
                    r.ty, r.nodes, edge.ty, edge.tentacles
                )));
            }
            g.insert_edge(r.edge, edge.clone(), self.graph.theta_entry(r.edge));
        }
        if g.edge_count() != self.graph.edge_count() {
            let missing: Vec<String> = self
                .graph
                .edge_ids()
                .filter(|e| !seen.contains(e))
                .map(|e| e.to_string())
                .collect();
            return Err(TrackingError::Integrity(format!(
                "edges without a leaf: {}",
                missing.join(", ")
            )));
        }
        // same content; adopt the stored order
        let mut ordered = Graph::new();
        for (n, node) in self.graph.nodes() {
            ordered.insert_node(n, node.clone());
        }
        for e in self.graph.edge_ids() {
            ordered.insert_edge(e, g.edge(e).unwrap().clone(), g.theta_entry(e));
        }
        Ok(ordered)
    }

    /// Full structural self-check of forest, environment and graph.
    pub fn check_integrity(&self) -> Result<(), TrackingError> {
        self.current_graph()?;
        let r = self.initial.edge_count();
        if self.forest.roots().len() != r {
            return Err(TrackingError::Integrity(format!(
                "{} trees for {r} initial edges",
                self.forest.roots().len()
            )));
        }
        for v in self.forest.vertices() {
            let leaf = self.forest.is_leaf(v);
            let has2 = self.env.env2.contains_key(&v);
            if leaf && has2 {
                return Err(TrackingError::Integrity(format!("leaf {v} records a production")));
            }
            if !leaf && !has2 {
                return Err(TrackingError::Integrity(format!(
                    "internal vertex {v} records no production"
                )));
            }
        }
        for v in self.env.env1.keys().chain(self.env.env2.keys()) {
            if !self.forest.contains(*v) {
                return Err(TrackingError::Integrity(format!(
                    "environment mentions removed vertex {v}"
                )));
            }
        }
        let mut edges = BTreeSet::new();
        for r in self.env.env1.values() {
            if !edges.insert(r.edge) {
                return Err(TrackingError::Integrity(format!("edge {} recorded twice", r.edge)));
            }
        }
        Ok(())
    }

    /// Re-runs one logged event.
    pub fn apply_event(&mut self, style: &Style, event: &Event) -> Result<(), TrackingError> {
        match event {
            Event::Production { production, edge } => {
                self.record_production(style, production, *edge)?;
            }
            Event::Reconfiguration { rule, vertex, result } => {
                let rho = style
                    .rule(rule)
                    .ok_or_else(|| TrackingError::UnknownRule(rule.clone()))?;
                let got = crate::reconfig::apply_reconfiguration(self, style, rho, *vertex)?;
                if got != *result {
                    return Err(TrackingError::Diverged {
                        index: self.events.len() - 1,
                        detail: format!("reconfiguration rooted at {got}, log says {result}"),
                    });
                }
            }
            Event::Parse { vertex } => {
                crate::recovery::parse_tracked(self, style, *vertex, crate::recovery::ParseMode::Scoped)?;
            }
        }
        Ok(())
    }

    /// Rebuilds a system from its initial graph and event log.
    pub fn replay(initial: Graph, id_base: u64, events: &[Event], style: &Style) -> Result<Self, TrackingError> {
        let mut s = TrackedSystem::init(initial, id_base)?;
        for (i, ev) in events.iter().enumerate() {
            s.apply_event(style, ev).map_err(|e| TrackingError::Diverged {
                index: i,
                detail: e.to_string(),
            })?;
        }
        Ok(s)
    }

    /// `[e(n1,..,nk), p]` or `[e(..), ^]`; tombstones render as `[^, ^]`.
    pub fn vertex_label(&self, v: VertexId) -> String {
        let edge = match self.env.env1.get(&v) {
            Some(r) => r.label(&self.graph),
            None => "^".to_string(),
        };
        let p = self.env.env2.get(&v).map(String::as_str).unwrap_or("^");
        format!("[{edge}, {p}]")
    }

    /// Indented text rendering, one vertex per line.
    pub fn forest_text(&self) -> String {
        let mut out = String::new();
        for r in self.forest.roots() {
            let mut stack = vec![(*r, 0usize)];
            while let Some((v, depth)) = stack.pop() {
                let mark = if self.env.synthetic.contains(&v) {
                    " (synthetic)"
                } else {
                    ""
                };
                let _ = writeln!(out, "{}{v} {}{mark}", "  ".repeat(depth), self.vertex_label(v));
                for c in self.forest.children(v).iter().rev() {
                    stack.push((*c, depth + 1));
                }
            }
        }
        out
    }

    pub fn forest_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", name.replace('"', "\\\""));
        for v in self.forest.preorder() {
            let style = if self.env.synthetic.contains(&v) {
                ", style=dashed"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  {v} [shape=plaintext, label=\"{}\"{style}];",
                self.vertex_label(v).replace('"', "\\\"")
            );
            for c in self.forest.children(v) {
                let _ = writeln!(out, "  {v} -> {c} [arrowhead=none];");
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn init_makes_one_tree_per_edge() {
        let fx = fixtures::example1();
        let s = TrackedSystem::init(fx.graph.clone(), 100).unwrap();
        assert_eq!(s.forest.roots().len(), 3);
        let edges: Vec<_> = s.forest.roots().iter().map(|r| s.env.env1[r].edge).collect();
        assert_eq!(edges, vec![fx.edge("ff"), fx.edge("fl1"), fx.edge("fl2")]);
        assert!(s.env.env2.is_empty());
        s.check_integrity().unwrap();
    }

    #[test]
    fn empty_graph_gives_empty_forest() {
        let s = TrackedSystem::init(Graph::new(), 1).unwrap();
        assert!(s.forest.is_empty());
        assert!(s.env.env1.is_empty() && s.env.env2.is_empty());
        assert!(s.current_graph().unwrap().is_empty());
    }

    #[test]
    fn id_base_must_clear_the_initial_graph() {
        let fx = fixtures::example1();
        assert!(matches!(
            TrackedSystem::init(fx.graph.clone(), 2),
            Err(TrackingError::IdBase { .. })
        ));
    }

    #[test]
    fn example14_forest_and_labels() {
        let fx = fixtures::example14();
        let s = &fx.system;
        let x = s.forest.roots()[0];
        let kids = s.forest.children(x).to_vec();
        assert_eq!(kids.len(), 2);
        assert_eq!(s.forest.children(kids[1]).len(), 2);
        assert!(
            s.vertex_label(x).ends_with("(u1,u2), browseFlights]"),
            "{}",
            s.vertex_label(x)
        );
        assert!(s.vertex_label(kids[0]).ends_with(", ^]"));
        s.check_integrity().unwrap();
        assert!(s.forest_text().contains("browseFlights"));
    }

    #[test]
    fn empty_rhs_leaves_a_tombstone() {
        let style = fixtures::travel();
        let mut ids = IdGen::new();
        let g = crate::style::build_graph(&style.types, &mut ids, &[("c", "Client", &["a", "b"], true)]).unwrap();
        let c = g.edge_named("c").unwrap();
        let mut s = TrackedSystem::init(g, ids.peek()).unwrap();
        let step = s.record_production(&style, "leave", c).unwrap();
        assert_eq!(step.children.len(), 1);
        assert!(s.is_tombstone(step.children[0]));
        assert_eq!(s.current_graph().unwrap().edge_count(), 0);
        s.check_integrity().unwrap();
    }

    #[test]
    fn failed_step_leaves_system_unchanged() {
        let fx = fixtures::example14();
        let mut s = fx.system.clone();
        let before = s.clone();
        let f1 = fx.edge("f1");
        assert!(s.record_production(&fx.style, "bookFlight", f1).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn replay_reproduces_the_system() {
        let fx = fixtures::example14();
        let s = &fx.system;
        let again = TrackedSystem::replay(s.initial().clone(), s.id_base(), &s.events, &fx.style).unwrap();
        assert_eq!(&again, s);
    }
}
