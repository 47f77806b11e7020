//! Exhaustive enumeration of small typed graphs and assignments, for
//! bounded equivalence checks and the precondition oracle.

use crate::graph::Graph;
use crate::ids::{EdgeId, NodeId};
use crate::logic::{satisfies, Assignment, Formula, LogicError, Var};
use crate::typegraph::TypeGraph;

/// Limits for [`for_each_graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub max_edges: usize,
    pub max_nodes: usize,
}

impl Bounds {
    pub fn edges(max_edges: usize) -> Self {
        Bounds {
            max_edges,
            max_nodes: 6,
        }
    }
}

/// Calls `f` on every graph (up to node renaming, and up to edge order
/// within a type) with at most `b.max_edges` edges drawn from `types`, at
/// most `b.max_nodes` nodes and no isolated nodes. Every edge has θ = 1.
/// Stops early when `f` returns false.
pub fn for_each_graph(tg: &TypeGraph, types: &[String], b: Bounds, mut f: impl FnMut(&Graph) -> bool) {
    let sigs: Vec<(String, Vec<String>)> = types
        .iter()
        .filter_map(|t| tg.signature(t).map(|s| (t.clone(), s.to_vec())))
        .collect();
    let mut seq = Vec::new();
    for k in 0..=b.max_edges {
        if !type_sequences(&sigs, k, 0, &mut seq, b, &mut f) {
            return;
        }
    }
}

fn type_sequences(
    sigs: &[(String, Vec<String>)],
    left: usize,
    from: usize,
    seq: &mut Vec<usize>,
    b: Bounds,
    f: &mut impl FnMut(&Graph) -> bool,
) -> bool {
    if left == 0 {
        let slots: Vec<&str> = seq.iter().flat_map(|i| sigs[*i].1.iter().map(String::as_str)).collect();
        let mut rgs = Vec::with_capacity(slots.len());
        let mut types = Vec::new();
        return tentacles(sigs, seq, &slots, &mut rgs, &mut types, b, f);
    }
    for i in from..sigs.len() {
        seq.push(i);
        let go = type_sequences(sigs, left - 1, i, seq, b, f);
        seq.pop();
        if !go {
            return false;
        }
    }
    true
}

/// Restricted growth over tentacle slots, respecting node types.
fn tentacles(
    sigs: &[(String, Vec<String>)],
    seq: &[usize],
    slots: &[&str],
    rgs: &mut Vec<usize>,
    node_types: &mut Vec<String>,
    b: Bounds,
    f: &mut impl FnMut(&Graph) -> bool,
) -> bool {
    let at = rgs.len();
    if at == slots.len() {
        let mut g = Graph::new();
        for (i, ty) in node_types.iter().enumerate() {
            g.add_node(NodeId(i as u64 + 1), ty);
        }
        let mut k = 0;
        for (j, i) in seq.iter().enumerate() {
            let (ty, sig) = &sigs[*i];
            let t = (0..sig.len()).map(|s| NodeId(rgs[k + s] as u64 + 1)).collect();
            k += sig.len();
            g.add_edge(EdgeId(1000 + j as u64), ty, t, true);
        }
        return f(&g);
    }
    let fresh = node_types.len();
    for n in 0..=fresh {
        if n == fresh {
            if fresh == b.max_nodes {
                break;
            }
            node_types.push(slots[at].to_string());
        } else if node_types[n] != slots[at] {
            continue;
        }
        rgs.push(n);
        let go = tentacles(sigs, seq, slots, rgs, node_types, b, f);
        rgs.pop();
        if n == fresh {
            node_types.pop();
        }
        if !go {
            return false;
        }
    }
    true
}

/// Calls `f` on every assignment of `vars` to nodes of `g` or to fresh
/// isolated nodes (added to a copy of the graph handed to `f`). Variables
/// are assigned up to renaming of the fresh nodes.
pub fn for_each_assignment(
    g: &Graph,
    vars: &[Var],
    filler_type: &str,
    mut f: impl FnMut(&Graph, &Assignment) -> bool,
) -> bool {
    let nodes: Vec<NodeId> = g.node_ids().collect();
    let base = g.max_id().max(1) + 1;
    let mut choice = Vec::new();
    assign(g, vars, &nodes, base, filler_type, &mut choice, 0, &mut f)
}

#[allow(clippy::too_many_arguments)]
fn assign(
    g: &Graph,
    vars: &[Var],
    nodes: &[NodeId],
    base: u64,
    filler: &str,
    choice: &mut Vec<NodeId>,
    extra: u64,
    f: &mut impl FnMut(&Graph, &Assignment) -> bool,
) -> bool {
    if choice.len() == vars.len() {
        let mut h = g.clone();
        for i in 0..extra {
            h.add_node(NodeId(base + i), filler);
        }
        let a: Assignment = vars.iter().cloned().zip(choice.iter().copied()).collect();
        return f(&h, &a);
    }
    let options = nodes.iter().copied().chain((0..=extra).map(|i| NodeId(base + i)));
    for n in options.collect::<Vec<_>>() {
        let grows = n.0 == base + extra;
        choice.push(n);
        let go = assign(g, vars, nodes, base, filler, choice, extra + grows as u64, f);
        choice.pop();
        if !go {
            return false;
        }
    }
    true
}

/// A graph and assignment on which two formulas disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub graph: Graph,
    pub assignment: Assignment,
    pub left: bool,
}

/// Compares `a` and `b` on all graphs within `bounds` over the edge types
/// either mentions, and all assignments of their free variables.
pub fn bounded_equivalent(
    a: &Formula,
    b: &Formula,
    tg: &TypeGraph,
    bounds: Bounds,
) -> Result<Option<Disagreement>, LogicError> {
    let mut types: Vec<String> = a.edge_types().union(&b.edge_types()).cloned().collect();
    types.sort();
    let vars: Vec<Var> = a.free_vars().union(&b.free_vars()).cloned().collect();
    let filler = tg.node_types().first().cloned().unwrap_or_default();
    let mut found = None;
    let mut err = None;
    for_each_graph(tg, &types, bounds, |g| {
        for_each_assignment(g, &vars, &filler, |h, asg| {
            match (satisfies(h, a, asg), satisfies(h, b, asg)) {
                (Ok(x), Ok(y)) if x == y => return true,
                (Ok(x), Ok(_)) => {
                    found = Some(Disagreement {
                        graph: h.clone(),
                        assignment: asg.clone(),
                        left: x,
                    })
                }
                (Err(e), _) | (_, Err(e)) => err = Some(e),
            }
            false
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(found),
    }
}
