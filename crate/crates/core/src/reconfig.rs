//! Reconfiguration by term rewriting over tracking forests: the bow tie
//! match, the graph of a term, and rule application with forest surgery.

use crate::graph::Graph;
use crate::ids::{EdgeId, IdGen, NodeId, VertexId};
use crate::style::Style;
use crate::term::{ReconfigRule, Term};
use crate::tracking::{EdgeRecord, Event, TrackedSystem};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconfigError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("rule `{rule}` does not match the tree at {vertex}")]
    NoMatch { rule: String, vertex: VertexId },
    #[error("rule `{rule}` matches nowhere")]
    NoMatchAnywhere { rule: String },
    #[error("rule `{0}` changes the sort of the rewritten term")]
    NotSameSort(String),
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("`{op}` takes {expected} arguments, {found} given")]
    Arity { op: String, expected: usize, found: usize },
    #[error("vertex {0} records no edge")]
    NoRecord(VertexId),
    #[error("gluing would identify distinct nodes {0} and {1}")]
    Merge(NodeId, NodeId),
    #[error("gluing identifies nodes of types `{0}` and `{1}`")]
    NodeType(String, String),
    #[error("the rewritten graph is ill-typed: {0}")]
    IllTyped(String),
}

fn canonical<'a>(style: &'a Style, op: &'a str) -> &'a str {
    style.production(op).map(|p| p.name.as_str()).unwrap_or(op)
}

/// `t ⋈ T_v`: the internal nodes of `t` line up with the tree at `v`, each
/// application with the production recorded there and each variable with a
/// vertex whose recorded edge has the variable's sort.
pub fn bow_tie(sys: &TrackedSystem, style: &Style, t: &Term, v: VertexId) -> bool {
    var_trees(sys, style, t, v).is_some()
}

/// The subtree each variable of `t` stands for, when `t ⋈ T_v`.
pub fn var_trees(sys: &TrackedSystem, style: &Style, t: &Term, v: VertexId) -> Option<BTreeMap<String, VertexId>> {
    let mut out = BTreeMap::new();
    walk(sys, style, t, v, &mut out).then_some(out)
}

fn walk(sys: &TrackedSystem, style: &Style, t: &Term, v: VertexId, out: &mut BTreeMap<String, VertexId>) -> bool {
    if !sys.forest.contains(v) {
        return false;
    }
    match t {
        Term::Var { name, sort } => match sys.env.env1.get(&v) {
            Some(r) if &r.ty == sort => {
                out.insert(name.clone(), v);
                true
            }
            _ => false,
        },
        Term::App { op, args } => {
            if sys.env.env2.get(&v).map(String::as_str) != Some(canonical(style, op)) {
                return false;
            }
            let kids = sys.live_children(v);
            kids.len() == args.len() && args.iter().zip(kids).all(|(a, c)| walk(sys, style, a, c, out))
        }
    }
}

/// `get_var_tree`: the vertex standing for `x` in a match of `t` at `v`.
pub fn get_var_tree(sys: &TrackedSystem, style: &Style, t: &Term, v: VertexId, x: &str) -> Option<VertexId> {
    var_trees(sys, style, t, v)?.get(x).copied()
}

/// Every vertex (in forest preorder) where `t` matches.
pub fn matches(sys: &TrackedSystem, style: &Style, t: &Term) -> Vec<VertexId> {
    sys.forest
        .preorder()
        .into_iter()
        .filter(|v| bow_tie(sys, style, t, *v))
        .collect()
}

/// `γ(t)`: the graph of a term. Applications contribute the nodes of a
/// fresh copy of their right-hand side; variables become placeholder edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermGraph {
    pub graph: Graph,
    /// Nodes standing for the tentacles of the term's root edge.
    pub interface: Vec<NodeId>,
    pub placeholders: BTreeMap<String, EdgeId>,
    /// For each application position (by path): left-hand type and the
    /// nodes of the edge it rewrites.
    pub positions: BTreeMap<Vec<usize>, (String, Vec<NodeId>)>,
}

pub fn term_to_graph(style: &Style, t: &Term, ids: &mut IdGen) -> Result<TermGraph, ReconfigError> {
    let mut tg = TermGraph {
        graph: Graph::new(),
        interface: Vec::new(),
        placeholders: BTreeMap::new(),
        positions: BTreeMap::new(),
    };
    match t {
        Term::Var { name, sort } => {
            let sig = style
                .types
                .signature(sort)
                .ok_or_else(|| ReconfigError::UnknownOp(sort.clone()))?
                .to_vec();
            let nodes: Vec<NodeId> = sig.iter().map(|s| tg.graph.add_node(ids.node(), s)).collect();
            let e = tg.graph.add_edge(ids.edge(), sort, nodes.clone(), true);
            tg.placeholders.insert(name.clone(), e);
            tg.interface = nodes;
        }
        Term::App { .. } => {
            tg.interface = build(style, t, &mut Vec::new(), &mut tg, ids)?;
        }
    }
    Ok(tg)
}

fn build(
    style: &Style,
    t: &Term,
    path: &mut Vec<usize>,
    tg: &mut TermGraph,
    ids: &mut IdGen,
) -> Result<Vec<NodeId>, ReconfigError> {
    let Term::App { op, args } = t else {
        unreachable!("variables are placed by their parent")
    };
    let p = style
        .production(op)
        .ok_or_else(|| ReconfigError::UnknownOp(op.clone()))?;
    if p.rhs_order.len() != args.len() {
        return Err(ReconfigError::Arity {
            op: op.clone(),
            expected: p.rhs_order.len(),
            found: args.len(),
        });
    }
    let mut child_deltas = Vec::with_capacity(args.len());
    for (j, a) in args.iter().enumerate() {
        if a.is_var() {
            child_deltas.push(None);
        } else {
            path.push(j);
            child_deltas.push(Some(build(style, a, path, tg, ids)?));
            path.pop();
        }
    }
    let mut copy = BTreeMap::new();
    for (r, node) in p.rhs.nodes() {
        copy.insert(r, tg.graph.add_node(ids.node(), &node.ty));
    }
    for (j, (re, a)) in p.rhs_order.iter().zip(args).enumerate() {
        let edge = p.rhs.edge(*re).unwrap();
        let slots: Vec<NodeId> = edge.tentacles.iter().map(|n| copy[n]).collect();
        match (&child_deltas[j], a) {
            (None, Term::Var { name, .. }) => {
                let e = tg.graph.add_edge(ids.edge(), &edge.ty, slots, true);
                tg.placeholders.insert(name.clone(), e);
            }
            (Some(delta), _) => {
                for (from, to) in delta.iter().zip(&slots) {
                    rename(tg, *from, *to);
                }
            }
            (None, _) => unreachable!(),
        }
    }
    let delta: Vec<NodeId> = p.interface_along_lhs().iter().map(|n| copy[n]).collect();
    tg.positions
        .insert(path.clone(), (p.lhs_type().to_string(), delta.clone()));
    Ok(delta)
}

/// Identifies `from` with `to` inside the term graph under construction.
fn rename(tg: &mut TermGraph, from: NodeId, to: NodeId) {
    if from == to {
        return;
    }
    let edges: Vec<EdgeId> = tg.graph.edge_ids().collect();
    for e in edges {
        for n in &mut tg.graph.edge_mut(e).unwrap().tentacles {
            if *n == from {
                *n = to;
            }
        }
    }
    for (_, delta) in tg.positions.values_mut() {
        for n in delta.iter_mut() {
            if *n == from {
                *n = to;
            }
        }
    }
    tg.graph.remove_node(from);
}

/// Union-find over node ids where nodes of the host graph are rigid.
struct Glue<'a> {
    parent: BTreeMap<NodeId, NodeId>,
    host: &'a Graph,
    fresh: &'a Graph,
}

impl Glue<'_> {
    fn find(&self, mut n: NodeId) -> NodeId {
        while let Some(p) = self.parent.get(&n) {
            n = *p;
        }
        n
    }

    fn ty(&self, n: NodeId) -> &str {
        self.host
            .node(n)
            .or_else(|| self.fresh.node(n))
            .map(|x| x.ty.as_str())
            .unwrap_or("")
    }

    fn union(&mut self, a: NodeId, b: NodeId) -> Result<(), ReconfigError> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return Ok(());
        }
        if self.ty(ra) != self.ty(rb) {
            return Err(ReconfigError::NodeType(self.ty(ra).into(), self.ty(rb).into()));
        }
        match (self.host.has_node(ra), self.host.has_node(rb)) {
            (true, true) => Err(ReconfigError::Merge(ra, rb)),
            (true, false) => {
                self.parent.insert(rb, ra);
                Ok(())
            }
            _ => {
                self.parent.insert(ra, rb);
                Ok(())
            }
        }
    }
}

/// Applies `rule` at `vertex` and returns the root of the new subtree.
/// On error `sys` is unchanged.
pub fn apply_reconfiguration(
    sys: &mut TrackedSystem,
    style: &Style,
    rule: &ReconfigRule,
    vertex: VertexId,
) -> Result<VertexId, ReconfigError> {
    if !sys.forest.contains(vertex) {
        return Err(ReconfigError::UnknownVertex(vertex));
    }
    if !rule.same_sort {
        return Err(ReconfigError::NotSameSort(rule.name.clone()));
    }
    let vt = var_trees(sys, style, &rule.lhs, vertex).ok_or_else(|| ReconfigError::NoMatch {
        rule: rule.name.clone(),
        vertex,
    })?;
    let root = sys
        .env
        .env1
        .get(&vertex)
        .cloned()
        .ok_or(ReconfigError::NoRecord(vertex))?;

    let host = &sys.graph;
    let lhs_edges: BTreeSet<EdgeId> = sys
        .edge_leaves_under(vertex)
        .iter()
        .map(|v| sys.env.env1[v].edge)
        .collect();
    let lhs_nodes: BTreeSet<NodeId> = lhs_edges
        .iter()
        .flat_map(|e| host.edge(*e).unwrap().tentacles.iter().copied())
        .collect();

    // subgraphs G_x with their boundaries
    let rhs_vars = rule.rhs.vars();
    let mut var_edges: BTreeMap<String, Vec<EdgeId>> = BTreeMap::new();
    let mut boundary: BTreeMap<String, Vec<NodeId>> = BTreeMap::new();
    for x in &rhs_vars {
        let vx = vt[x];
        let rec = sys.env.env1.get(&vx).ok_or(ReconfigError::NoRecord(vx))?;
        boundary.insert(x.clone(), rec.nodes.clone());
        let edges = sys.edge_leaves_under(vx).iter().map(|v| sys.env.env1[v].edge).collect();
        var_edges.insert(x.clone(), edges);
    }

    let mut ids = sys.ids.clone();
    let gamma = term_to_graph(style, &rule.rhs, &mut ids)?;

    let mut glue = Glue {
        parent: BTreeMap::new(),
        host,
        fresh: &gamma.graph,
    };
    if gamma.interface.len() != root.nodes.len() {
        return Err(ReconfigError::Arity {
            op: root.ty.clone(),
            expected: root.nodes.len(),
            found: gamma.interface.len(),
        });
    }
    for (p, n) in gamma.interface.iter().zip(&root.nodes) {
        glue.union(*p, *n)?;
    }
    // a node repeated on a boundary identifies the placeholder nodes it meets
    for (x, b) in &boundary {
        let slots = &gamma.graph.edge(gamma.placeholders[x]).unwrap().tentacles;
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                if b[i] == b[j] {
                    glue.union(slots[i], slots[j])?;
                }
            }
        }
    }

    let mut g = host.clone();
    let kept: BTreeSet<EdgeId> = var_edges.values().flatten().copied().collect();
    for e in &lhs_edges {
        if !kept.contains(e) {
            g.remove_edge(*e);
        }
    }
    for (n, node) in gamma.graph.nodes() {
        if glue.find(n) == n {
            g.add_node(n, &node.ty);
        }
    }
    let mut renamings: BTreeMap<String, BTreeMap<NodeId, NodeId>> = BTreeMap::new();
    for (x, b) in &boundary {
        let slots = &gamma.graph.edge(gamma.placeholders[x]).unwrap().tentacles;
        let rho: BTreeMap<NodeId, NodeId> = b.iter().zip(slots).map(|(from, to)| (*from, glue.find(*to))).collect();
        for e in &var_edges[x] {
            for n in &mut g.edge_mut(*e).unwrap().tentacles {
                if let Some(t) = rho.get(n) {
                    *n = *t;
                }
            }
        }
        renamings.insert(x.clone(), rho);
    }
    let attached = g.attached_nodes();
    let protected: BTreeSet<NodeId> = root.nodes.iter().copied().collect();
    for n in &lhs_nodes {
        if !attached.contains(n) && !protected.contains(n) {
            g.remove_node(*n);
        }
    }
    let report = g.validate(&style.types);
    if !report.is_ok() {
        return Err(ReconfigError::IllTyped(format!("{:?}", report.violations)));
    }

    // forest surgery on a copy
    let mut next = sys.clone();
    let keep: BTreeSet<VertexId> = rhs_vars.iter().flat_map(|x| sys.forest.subtree(vt[x])).collect();
    for x in &rhs_vars {
        let rho = &renamings[x];
        for v in sys.forest.subtree(vt[x]) {
            if let Some(r) = next.env.env1.get_mut(&v) {
                for n in &mut r.nodes {
                    if let Some(t) = rho.get(n) {
                        *n = *t;
                    }
                }
            }
        }
    }
    let result = match &rule.rhs {
        Term::Var { name, .. } => vt[name],
        Term::App { .. } => {
            let r = ids.vertex();
            next.forest.add_detached(r);
            next.env.env1.insert(r, root.clone());
            if sys.env.synthetic.contains(&vertex) {
                next.env.synthetic.insert(r);
            }
            grow(
                &mut next,
                style,
                &rule.rhs,
                r,
                &mut Vec::new(),
                &vt,
                &gamma,
                &glue,
                &mut ids,
            );
            r
        }
    };
    let removed: Vec<VertexId> = sys
        .forest
        .subtree(vertex)
        .into_iter()
        .filter(|v| !keep.contains(v))
        .collect();
    next.forest.replace_subtree(vertex, result, &keep);
    for v in removed {
        if v == result {
            continue;
        }
        next.env.env1.remove(&v);
        next.env.env2.remove(&v);
        next.env.synthetic.remove(&v);
    }
    next.graph = g;
    next.ids = ids;
    next.events.push(Event::Reconfiguration {
        rule: rule.name.clone(),
        vertex,
        result,
    });
    *sys = next;
    Ok(result)
}

/// Builds `T″` below `at` for the application `t` (already recorded at `at`).
#[allow(clippy::too_many_arguments)]
fn grow(
    sys: &mut TrackedSystem,
    style: &Style,
    t: &Term,
    at: VertexId,
    path: &mut Vec<usize>,
    vt: &BTreeMap<String, VertexId>,
    gamma: &TermGraph,
    glue: &Glue,
    ids: &mut IdGen,
) {
    let Term::App { op, args } = t else { unreachable!() };
    sys.env.env2.insert(at, canonical(style, op).to_string());
    if args.is_empty() {
        let tomb = ids.vertex();
        sys.forest.add_child(at, tomb);
        return;
    }
    for (j, a) in args.iter().enumerate() {
        match a {
            Term::Var { name, .. } => sys.forest.attach(at, vt[name]),
            Term::App { .. } => {
                path.push(j);
                let (ty, delta) = &gamma.positions[path.as_slice()];
                let w = ids.vertex();
                sys.forest.add_child(at, w);
                sys.env.env1.insert(
                    w,
                    EdgeRecord {
                        edge: ids.edge(),
                        ty: ty.clone(),
                        nodes: delta.iter().map(|n| glue.find(*n)).collect(),
                    },
                );
                sys.env.synthetic.insert(w);
                grow(sys, style, a, w, path, vt, gamma, glue, ids);
                path.pop();
            }
        }
    }
}

/// Applies `rule` at the first matching vertex in forest preorder.
pub fn apply_anywhere(sys: &mut TrackedSystem, style: &Style, rule: &ReconfigRule) -> Result<VertexId, ReconfigError> {
    let v = matches(sys, style, &rule.lhs)
        .into_iter()
        .next()
        .ok_or_else(|| ReconfigError::NoMatchAnywhere {
            rule: rule.name.clone(),
        })?;
    apply_reconfiguration(sys, style, rule, v)
}
