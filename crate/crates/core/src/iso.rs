//! Backtracking isomorphism search for desk-scale typed hypergraphs.

use crate::graph::{Graph, GraphMorphism};
use crate::ids::{EdgeId, NodeId};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Finds a bijective typed morphism `g -> h` whose inverse is also a
/// morphism. With `respect_theta` the replaceability of matched edges must
/// agree as well. Display names are ignored.
pub fn find_isomorphism(g: &Graph, h: &Graph, respect_theta: bool) -> Option<GraphMorphism> {
    if g.node_count() != h.node_count() || g.edge_count() != h.edge_count() {
        return None;
    }
    if type_census(g, respect_theta) != type_census(h, respect_theta) {
        return None;
    }
    let g_degree = degrees(g);
    let h_degree = degrees(h);
    let mut search = Search {
        g,
        h,
        respect_theta,
        order: connectivity_order(g),
        g_degree,
        h_degree,
        node_fwd: HashMap::new(),
        node_bwd: HashMap::new(),
        edge_fwd: BTreeMap::new(),
        used: BTreeSet::new(),
    };
    if !search.run(0) {
        return None;
    }
    let mut nodes: BTreeMap<NodeId, NodeId> = search.node_fwd.into_iter().collect();
    // remaining nodes are isolated on both sides; pair them up by type
    let taken: BTreeSet<NodeId> = nodes.values().copied().collect();
    let mut spare: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
    for (id, n) in h.nodes() {
        if !taken.contains(&id) {
            spare.entry(n.ty.as_str()).or_default().push(id);
        }
    }
    for (id, n) in g.nodes() {
        if nodes.contains_key(&id) {
            continue;
        }
        let pool = spare.get_mut(n.ty.as_str())?;
        nodes.insert(id, pool.pop()?);
    }
    Some(GraphMorphism {
        nodes,
        edges: search.edge_fwd,
    })
}

/// Isomorphism test; see [`find_isomorphism`].
pub fn isomorphic(g: &Graph, h: &Graph, respect_theta: bool) -> bool {
    find_isomorphism(g, h, respect_theta).is_some()
}

fn type_census(g: &Graph, respect_theta: bool) -> (BTreeMap<String, usize>, BTreeMap<(String, bool), usize>) {
    let mut nodes = BTreeMap::new();
    for (_, n) in g.nodes() {
        *nodes.entry(n.ty.clone()).or_insert(0) += 1;
    }
    let mut edges = BTreeMap::new();
    for (id, e) in g.edges() {
        let t = respect_theta && g.theta(id);
        *edges.entry((e.ty.clone(), t)).or_insert(0) += 1;
    }
    (nodes, edges)
}

fn degrees(g: &Graph) -> HashMap<NodeId, usize> {
    let mut d = HashMap::new();
    for (_, e) in g.edges() {
        for n in &e.tentacles {
            *d.entry(*n).or_insert(0) += 1;
        }
    }
    d
}

/// Orders edges so that, where possible, each edge shares a node with an
/// earlier one; this makes node constraints bite early.
fn connectivity_order(g: &Graph) -> Vec<EdgeId> {
    let mut remaining: Vec<EdgeId> = g.edge_ids().collect();
    let mut order = Vec::with_capacity(remaining.len());
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .position(|e| g.edge(*e).unwrap().tentacles.iter().any(|n| seen.contains(n)))
            .unwrap_or(0);
        let e = remaining.remove(pos);
        seen.extend(g.edge(e).unwrap().tentacles.iter().copied());
        order.push(e);
    }
    order
}

struct Search<'a> {
    g: &'a Graph,
    h: &'a Graph,
    respect_theta: bool,
    order: Vec<EdgeId>,
    g_degree: HashMap<NodeId, usize>,
    h_degree: HashMap<NodeId, usize>,
    node_fwd: HashMap<NodeId, NodeId>,
    node_bwd: HashMap<NodeId, NodeId>,
    edge_fwd: BTreeMap<EdgeId, EdgeId>,
    used: BTreeSet<EdgeId>,
}

impl Search<'_> {
    fn run(&mut self, depth: usize) -> bool {
        let Some(&ge) = self.order.get(depth) else {
            return true;
        };
        let gedge = self.g.edge(ge).unwrap();
        let candidates: Vec<EdgeId> = self
            .h
            .edges()
            .filter(|(he, hedge)| {
                !self.used.contains(he)
                    && hedge.ty == gedge.ty
                    && hedge.tentacles.len() == gedge.tentacles.len()
                    && (!self.respect_theta || self.h.theta(*he) == self.g.theta(ge))
            })
            .map(|(he, _)| he)
            .collect();
        for he in candidates {
            let Some(added) = self.bind_nodes(ge, he) else {
                continue;
            };
            self.used.insert(he);
            self.edge_fwd.insert(ge, he);
            if self.run(depth + 1) {
                return true;
            }
            self.edge_fwd.remove(&ge);
            self.used.remove(&he);
            for n in added {
                let m = self.node_fwd.remove(&n).unwrap();
                self.node_bwd.remove(&m);
            }
        }
        false
    }

    /// Extends the node bijection along the tentacles of `ge -> he`; returns
    /// the newly bound `g` nodes, or `None` (with nothing bound) on conflict.
    fn bind_nodes(&mut self, ge: EdgeId, he: EdgeId) -> Option<Vec<NodeId>> {
        let gt = &self.g.edge(ge).unwrap().tentacles;
        let ht = &self.h.edge(he).unwrap().tentacles;
        let mut added = Vec::new();
        for (a, b) in gt.iter().zip(ht) {
            let ok = match (self.node_fwd.get(a), self.node_bwd.get(b)) {
                (Some(x), _) => x == b,
                (None, Some(_)) => false,
                (None, None) => {
                    let same_type = self.g.node(*a).map(|n| &n.ty) == self.h.node(*b).map(|n| &n.ty);
                    let same_degree = self.g_degree.get(a) == self.h_degree.get(b);
                    if same_type && same_degree {
                        self.node_fwd.insert(*a, *b);
                        self.node_bwd.insert(*b, *a);
                        added.push(*a);
                        true
                    } else {
                        false
                    }
                }
            };
            if !ok {
                for n in added {
                    let m = self.node_fwd.remove(&n).unwrap();
                    self.node_bwd.remove(&m);
                }
                return None;
            }
        }
        Some(added)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::check_morphism;
    use crate::ids::IdGen;

    fn renamed_copy(g: &Graph, ids: &mut IdGen) -> Graph {
        let mut map = BTreeMap::new();
        let mut out = Graph::new();
        for (id, n) in g.nodes() {
            let fresh = ids.node();
            map.insert(id, fresh);
            out.add_node(fresh, &n.ty);
        }
        // reversed edge order on purpose
        let edges: Vec<_> = g.edges().collect();
        for (id, e) in edges.into_iter().rev() {
            let t = e.tentacles.iter().map(|n| map[n]).collect();
            out.add_edge(ids.edge(), &e.ty, t, g.theta(id));
        }
        out
    }

    #[test]
    fn finds_identity_on_self() {
        let fx = fixtures::example1();
        let f = find_isomorphism(&fx.graph, &fx.graph, true).unwrap();
        assert_eq!(check_morphism(&f, &fx.graph, &fx.graph), Ok(true));
    }

    #[test]
    fn finds_renamed_copy_and_inverse() {
        let fx = fixtures::example1();
        let mut ids = IdGen::starting_at(1000);
        let copy = renamed_copy(&fx.graph, &mut ids);
        let f = find_isomorphism(&fx.graph, &copy, true).unwrap();
        assert_eq!(check_morphism(&f, &fx.graph, &copy), Ok(true));
        let inv = f.inverse().unwrap();
        assert_eq!(check_morphism(&inv, &copy, &fx.graph), Ok(true));
    }

    #[test]
    fn valid_and_invalid_example_graphs_differ() {
        let fx = fixtures::example6();
        assert!(find_isomorphism(&fx.valid, &fx.invalid, false).is_none());
    }

    #[test]
    fn theta_is_respected_only_on_request() {
        let fx = fixtures::example1();
        let mut g = fx.graph.clone();
        g.set_theta(fx.edge("ff"), true);
        assert!(find_isomorphism(&fx.graph, &g, false).is_some());
        assert!(find_isomorphism(&fx.graph, &g, true).is_none());
    }

    #[test]
    fn isolated_nodes_are_paired_by_type() {
        let mut g = Graph::new();
        g.add_node(NodeId(1), "a");
        g.add_node(NodeId(2), "b");
        let mut h = Graph::new();
        h.add_node(NodeId(7), "b");
        h.add_node(NodeId(8), "a");
        let f = find_isomorphism(&g, &h, true).unwrap();
        assert_eq!(f.node(NodeId(1)), Some(NodeId(8)));
        h.node_mut(NodeId(7)).unwrap().ty = "a".into();
        assert!(find_isomorphism(&g, &h, true).is_none());
    }
}
