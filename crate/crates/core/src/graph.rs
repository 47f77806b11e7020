//! Typed hypergraphs with a replaceability map, morphisms between them and
//! validation against a [`TypeGraph`].
//!
//! A [`Graph`] keeps its tentacle function, typing and replaceability map as
//! separate tables so that ill-formed graphs can be represented (and reported)
//! rather than being unrepresentable. Edge order is insertion order and is
//! stable under removal.

use crate::ids::{EdgeId, NodeId};
use crate::typegraph::TypeGraph;
use indexmap::IndexMap;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub ty: String,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub ty: String,
    pub tentacles: Vec<NodeId>,
    pub name: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    nodes: IndexMap<NodeId, Node>,
    edges: IndexMap<EdgeId, Edge>,
    theta: BTreeMap<EdgeId, bool>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, ty: &str) -> NodeId {
        self.nodes.insert(
            id,
            Node {
                ty: ty.to_string(),
                name: None,
            },
        );
        id
    }

    pub fn add_named_node(&mut self, id: NodeId, ty: &str, name: &str) -> NodeId {
        self.nodes.insert(
            id,
            Node {
                ty: ty.to_string(),
                name: Some(name.to_string()),
            },
        );
        id
    }

    pub fn insert_node(&mut self, id: NodeId, node: Node) {
        self.nodes.insert(id, node);
    }

    pub fn add_edge(&mut self, id: EdgeId, ty: &str, tentacles: Vec<NodeId>, theta: bool) -> EdgeId {
        self.insert_edge(
            id,
            Edge {
                ty: ty.to_string(),
                tentacles,
                name: None,
            },
            Some(theta),
        );
        id
    }

    pub fn add_named_edge(&mut self, id: EdgeId, ty: &str, tentacles: Vec<NodeId>, theta: bool, name: &str) -> EdgeId {
        self.insert_edge(
            id,
            Edge {
                ty: ty.to_string(),
                tentacles,
                name: Some(name.to_string()),
            },
            Some(theta),
        );
        id
    }

    /// Inserts (or overwrites) an edge. `theta = None` leaves the
    /// replaceability map undefined on it.
    pub fn insert_edge(&mut self, id: EdgeId, edge: Edge, theta: Option<bool>) {
        self.edges.insert(id, edge);
        match theta {
            Some(t) => {
                self.theta.insert(id, t);
            }
            None => {
                self.theta.remove(&id);
            }
        }
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Option<Edge> {
        self.theta.remove(&id);
        self.edges.shift_remove(&id)
    }

    pub fn remove_node(&mut self, id: NodeId) -> Option<Node> {
        self.nodes.shift_remove(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> Option<&mut Edge> {
        self.edges.get_mut(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        self.nodes.get_mut(&id)
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn has_edge(&self, id: EdgeId) -> bool {
        self.edges.contains_key(&id)
    }

    /// The replaceability of `id`; edges outside the map count as
    /// non-replaceable.
    pub fn theta(&self, id: EdgeId) -> bool {
        self.theta.get(&id).copied().unwrap_or(false)
    }

    pub fn theta_entry(&self, id: EdgeId) -> Option<bool> {
        self.theta.get(&id).copied()
    }

    pub fn set_theta(&mut self, id: EdgeId, theta: bool) {
        self.theta.insert(id, theta);
    }

    pub fn clear_theta(&mut self, id: EdgeId) {
        self.theta.remove(&id);
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> + '_ {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    /// Edges in their persisted order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> + '_ {
        self.edges.iter().map(|(k, v)| (*k, v))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    /// The `index`-th edge (0-based) in persisted order.
    pub fn edge_at(&self, index: usize) -> Option<EdgeId> {
        self.edges.get_index(index).map(|(k, _)| *k)
    }

    pub fn edges_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = (EdgeId, &'a Edge)> + 'a {
        self.edges().filter(move |(_, e)| e.ty == ty)
    }

    pub fn incident_edges(&self, node: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges()
            .filter(move |(_, e)| e.tentacles.contains(&node))
            .map(|(id, _)| id)
    }

    /// Nodes attached to at least one edge.
    pub fn attached_nodes(&self) -> BTreeSet<NodeId> {
        self.edges.values().flat_map(|e| e.tentacles.iter().copied()).collect()
    }

    /// `G \ E`: the graph without the given edges; every node is kept.
    pub fn without_edges(&self, removed: &[EdgeId]) -> Graph {
        let mut g = self.clone();
        for e in removed {
            g.remove_edge(*e);
        }
        g
    }

    /// Largest id mentioned anywhere in the graph (0 for the empty graph).
    pub fn max_id(&self) -> u64 {
        let n = self.nodes.keys().map(|n| n.0).max().unwrap_or(0);
        let e = self.edges.keys().map(|e| e.0).max().unwrap_or(0);
        let t = self
            .edges
            .values()
            .flat_map(|e| e.tentacles.iter().map(|n| n.0))
            .max()
            .unwrap_or(0);
        n.max(e).max(t)
    }

    pub fn node_named(&self, name: &str) -> Option<NodeId> {
        self.nodes()
            .find(|(_, n)| n.name.as_deref() == Some(name))
            .map(|(id, _)| id)
    }

    pub fn edge_named(&self, name: &str) -> Option<EdgeId> {
        self.edges()
            .find(|(_, e)| e.name.as_deref() == Some(name))
            .map(|(id, _)| id)
    }

    pub fn node_label(&self, id: NodeId) -> String {
        match self.nodes.get(&id).and_then(|n| n.name.as_deref()) {
            Some(name) => name.to_string(),
            None => id.to_string(),
        }
    }

    pub fn edge_label(&self, id: EdgeId) -> String {
        match self.edges.get(&id).and_then(|e| e.name.as_deref()) {
            Some(name) => name.to_string(),
            None => id.to_string(),
        }
    }

    /// Equality including edge order (plain `==` ignores order).
    pub fn identical(&self, other: &Graph) -> bool {
        self == other && self.edges.keys().eq(other.edges.keys()) && self.nodes.keys().eq(other.nodes.keys())
    }

    /// Equality of the structural content: same nodes, edges, tentacles,
    /// types and replaceability, ignoring display names and order.
    pub fn same_structure(&self, other: &Graph) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.edges.len() == other.edges.len()
            && self
                .nodes
                .iter()
                .all(|(id, n)| other.nodes.get(id).is_some_and(|m| m.ty == n.ty))
            && self.edges.iter().all(|(id, e)| {
                other
                    .edges
                    .get(id)
                    .is_some_and(|f| f.ty == e.ty && f.tentacles == e.tentacles)
                    && self.theta_entry(*id) == other.theta_entry(*id)
            })
    }

    /// Checks every typing invariant against `tg`.
    pub fn validate(&self, tg: &TypeGraph) -> ValidationReport {
        let mut violations = Vec::new();
        let node_ids: BTreeSet<u64> = self.nodes.keys().map(|n| n.0).collect();
        for id in self.edges.keys() {
            if node_ids.contains(&id.0) {
                violations.push(Violation::DuplicateId { id: id.0 });
            }
        }
        for (id, node) in &self.nodes {
            if !tg.has_node_type(&node.ty) {
                violations.push(Violation::UnknownNodeType {
                    node: *id,
                    ty: node.ty.clone(),
                });
            }
        }
        for (id, edge) in &self.edges {
            if !self.theta.contains_key(id) {
                violations.push(Violation::MissingTheta { edge: *id });
            }
            for (pos, n) in edge.tentacles.iter().enumerate() {
                if !self.nodes.contains_key(n) {
                    violations.push(Violation::DanglingTentacle {
                        edge: *id,
                        position: pos,
                        node: *n,
                    });
                }
            }
            let Some(sig) = tg.signature(&edge.ty) else {
                violations.push(Violation::UnknownEdgeType {
                    edge: *id,
                    ty: edge.ty.clone(),
                });
                continue;
            };
            if sig.len() != edge.tentacles.len() {
                violations.push(Violation::ArityMismatch {
                    edge: *id,
                    expected: sig.len(),
                    found: edge.tentacles.len(),
                });
                continue;
            }
            for (pos, (n, want)) in edge.tentacles.iter().zip(sig).enumerate() {
                if let Some(node) = self.nodes.get(n) {
                    if &node.ty != want {
                        violations.push(Violation::NodeTypeMismatch {
                            edge: *id,
                            position: pos,
                            node: *n,
                            expected: want.clone(),
                            found: node.ty.clone(),
                        });
                    }
                }
            }
        }
        for id in self.theta.keys() {
            if !self.edges.contains_key(id) {
                violations.push(Violation::StrayTheta { edge: *id });
            }
        }
        ValidationReport { violations }
    }

    /// Graphviz rendering: nodes are circles, edges are boxes (double border
    /// when replaceable) and the first tentacle carries the arrow head.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", escape(name));
        let _ = writeln!(out, "  rankdir=LR;");
        for (id, node) in &self.nodes {
            let _ = writeln!(
                out,
                "  {} [shape=circle, label=\"{}\\n{}\"];",
                id,
                escape(&self.node_label(*id)),
                escape(&node.ty)
            );
        }
        for (id, edge) in &self.edges {
            let peripheries = if self.theta(*id) { 2 } else { 1 };
            let _ = writeln!(
                out,
                "  {} [shape=box, peripheries={}, label=\"{}:{}\"];",
                id,
                peripheries,
                escape(&self.edge_label(*id)),
                escape(&edge.ty)
            );
            for (pos, n) in edge.tentacles.iter().enumerate() {
                let head = if pos == 0 { "normal" } else { "none" };
                let _ = writeln!(
                    out,
                    "  {} -> {} [arrowhead={}, taillabel=\"{}\"];",
                    id,
                    n,
                    head,
                    pos + 1
                );
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (id, edge) in &self.edges {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            let nodes: Vec<String> = edge.tentacles.iter().map(|n| self.node_label(*n)).collect();
            let mark = if self.theta(*id) { "*" } else { "" };
            write!(f, "{}{}:{}({})", self.edge_label(*id), mark, edge.ty, nodes.join(","))?;
        }
        if first {
            write!(f, "(no edges)")?;
        }
        Ok(())
    }
}

/// One broken typing condition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownNodeType {
        node: NodeId,
        ty: String,
    },
    UnknownEdgeType {
        edge: EdgeId,
        ty: String,
    },
    ArityMismatch {
        edge: EdgeId,
        expected: usize,
        found: usize,
    },
    NodeTypeMismatch {
        edge: EdgeId,
        position: usize,
        node: NodeId,
        expected: String,
        found: String,
    },
    DanglingTentacle {
        edge: EdgeId,
        position: usize,
        node: NodeId,
    },
    MissingTheta {
        edge: EdgeId,
    },
    StrayTheta {
        edge: EdgeId,
    },
    DuplicateId {
        id: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownNodeType { node, ty } => write!(f, "node {node}: unknown node type `{ty}`"),
            Violation::UnknownEdgeType { edge, ty } => write!(f, "edge {edge}: unknown edge type `{ty}`"),
            Violation::ArityMismatch { edge, expected, found } => {
                write!(f, "edge {edge}: arity {found}, signature expects {expected}")
            }
            Violation::NodeTypeMismatch {
                edge,
                position,
                node,
                expected,
                found,
            } => write!(
                f,
                "edge {edge}: tentacle {} attaches {node} of type `{found}`, signature expects `{expected}`",
                position + 1
            ),
            Violation::DanglingTentacle { edge, position, node } => {
                write!(
                    f,
                    "edge {edge}: tentacle {} points to missing node {node}",
                    position + 1
                )
            }
            Violation::MissingTheta { edge } => write!(f, "edge {edge}: replaceability undefined"),
            Violation::StrayTheta { edge } => write!(f, "replaceability given for missing edge {edge}"),
            Violation::DuplicateId { id } => write!(f, "id {id} names both a node and an edge"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphismError {
    #[error("node map is not defined on {0}")]
    NodeNotMapped(NodeId),
    #[error("edge map is not defined on {0}")]
    EdgeNotMapped(EdgeId),
}

/// A pair of maps on nodes and edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraphMorphism {
    pub nodes: BTreeMap<NodeId, NodeId>,
    pub edges: BTreeMap<EdgeId, EdgeId>,
}

impl GraphMorphism {
    pub fn identity(g: &Graph) -> Self {
        GraphMorphism {
            nodes: g.node_ids().map(|n| (n, n)).collect(),
            edges: g.edge_ids().map(|e| (e, e)).collect(),
        }
    }

    /// `other ∘ self`: first `self`, then `other`. Entries whose image is
    /// outside `other`'s domain are dropped.
    pub fn then(&self, other: &GraphMorphism) -> GraphMorphism {
        GraphMorphism {
            nodes: self
                .nodes
                .iter()
                .filter_map(|(k, v)| other.nodes.get(v).map(|w| (*k, *w)))
                .collect(),
            edges: self
                .edges
                .iter()
                .filter_map(|(k, v)| other.edges.get(v).map(|w| (*k, *w)))
                .collect(),
        }
    }

    /// The inverse, if both maps are injective.
    pub fn inverse(&self) -> Option<GraphMorphism> {
        let nodes: BTreeMap<_, _> = self.nodes.iter().map(|(k, v)| (*v, *k)).collect();
        let edges: BTreeMap<_, _> = self.edges.iter().map(|(k, v)| (*v, *k)).collect();
        (nodes.len() == self.nodes.len() && edges.len() == self.edges.len()).then_some(GraphMorphism { nodes, edges })
    }

    pub fn node(&self, n: NodeId) -> Option<NodeId> {
        self.nodes.get(&n).copied()
    }

    pub fn edge(&self, e: EdgeId) -> Option<EdgeId> {
        self.edges.get(&e).copied()
    }
}

/// Whether `f` is a typed morphism from `g` to `h`: tentacles and typing are
/// preserved. Replaceability is ignored. A map that is not total on `g` is an
/// error rather than `false`.
pub fn check_morphism(f: &GraphMorphism, g: &Graph, h: &Graph) -> Result<bool, MorphismError> {
    for n in g.node_ids() {
        if !f.nodes.contains_key(&n) {
            return Err(MorphismError::NodeNotMapped(n));
        }
    }
    for e in g.edge_ids() {
        if !f.edges.contains_key(&e) {
            return Err(MorphismError::EdgeNotMapped(e));
        }
    }
    for (n, node) in g.nodes() {
        match h.node(f.nodes[&n]) {
            Some(m) if m.ty == node.ty => {}
            _ => return Ok(false),
        }
    }
    for (e, edge) in g.edges() {
        let Some(target) = h.edge(f.edges[&e]) else {
            return Ok(false);
        };
        if target.ty != edge.ty || target.tentacles.len() != edge.tentacles.len() {
            return Ok(false);
        }
        for (a, b) in edge.tentacles.iter().zip(&target.tentacles) {
            // tentacles to nodes outside g cannot be mapped
            if f.nodes.get(a) != Some(b) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The typing map of `g` as a morphism into `tg.as_graph()`. Elements whose
/// type is not declared are left unmapped.
pub fn typing_morphism(g: &Graph, view: &crate::typegraph::TypeGraphView) -> GraphMorphism {
    GraphMorphism {
        nodes: g
            .nodes()
            .filter_map(|(id, n)| view.nodes.get(&n.ty).map(|t| (id, *t)))
            .collect(),
        edges: g
            .edges()
            .filter_map(|(id, e)| view.edges.get(&e.ty).map(|t| (id, *t)))
            .collect(),
    }
}
