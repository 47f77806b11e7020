//! Random systems and formulas shared by the integration tests.
#![allow(dead_code)]

use adr_core::fixtures;
use adr_core::graph::Graph;
use adr_core::ids::{EdgeId, IdGen, NodeId};
use adr_core::logic::{Formula, Var};
use adr_core::production::find_matches;
use adr_core::style::Style;
use adr_core::tracking::TrackedSystem;
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet};

/// A small travel graph of replaceable `Fl`, `Fls` and `Client` edges,
/// sometimes with a fixed `FF` edge.
pub fn random_travel_graph(rng: &mut impl Rng) -> Graph {
    let mut ids = IdGen::new();
    let mut g = Graph::new();
    let nodes: Vec<NodeId> = (0..rng.gen_range(2..=4))
        .map(|_| g.add_node(ids.node(), "dot"))
        .collect();
    for _ in 0..rng.gen_range(1..=3) {
        let ty = *["Fl", "Fls", "Client"].choose(rng).unwrap();
        let t = vec![*nodes.choose(rng).unwrap(), *nodes.choose(rng).unwrap()];
        g.add_edge(ids.edge(), ty, t, true);
    }
    if rng.gen_bool(0.3) {
        let t = vec![nodes[0], nodes[1]];
        g.add_edge(ids.edge(), "FF", t, false);
    }
    g
}

/// A single replaceable edge of a random travel type on distinct nodes.
pub fn random_single_edge(rng: &mut impl Rng) -> Graph {
    let mut ids = IdGen::new();
    let mut g = Graph::new();
    let a = g.add_node(ids.node(), "dot");
    let b = g.add_node(ids.node(), "dot");
    let ty = *["Fl", "Fls", "Client"].choose(rng).unwrap();
    g.add_edge(ids.edge(), ty, vec![a, b], true);
    g
}

pub fn start(g: Graph) -> TrackedSystem {
    let base = g.max_id() + 1;
    TrackedSystem::init(g, base).unwrap()
}

/// Applies one random applicable production; false when none applies.
pub fn random_step(sys: &mut TrackedSystem, style: &Style, rng: &mut impl Rng) -> bool {
    let mut options = Vec::new();
    for p in style.productions() {
        for m in find_matches(&sys.graph, p) {
            options.push((p.name.clone(), m.edge));
        }
    }
    match options.choose(rng) {
        Some((p, e)) => {
            sys.record_production(style, p, *e).unwrap();
            true
        }
        None => false,
    }
}

/// Runs up to `steps` random productions, returning the system before
/// every step that happened.
pub fn random_derivation(
    g0: Graph,
    style: &Style,
    steps: usize,
    rng: &mut impl Rng,
) -> (TrackedSystem, Vec<TrackedSystem>) {
    let mut sys = start(g0);
    let mut before = Vec::new();
    for _ in 0..steps {
        let snap = sys.clone();
        if !random_step(&mut sys, style, rng) {
            break;
        }
        before.push(snap);
    }
    (sys, before)
}

/// Checks directly (without the engine's own integrity check) that the
/// non-tombstone leaves and the edges of the graph correspond one to one,
/// with matching records.
pub fn leaf_edge_bijection(sys: &TrackedSystem) -> Result<(), String> {
    let mut seen: BTreeMap<EdgeId, usize> = BTreeMap::new();
    for v in sys.forest.vertices() {
        if !sys.forest.is_leaf(v) || sys.env.env2.contains_key(&v) {
            continue;
        }
        let Some(rec) = sys.env.env1.get(&v) else { continue };
        *seen.entry(rec.edge).or_default() += 1;
        let e = sys
            .graph
            .edge(rec.edge)
            .ok_or(format!("leaf {v} records missing edge {}", rec.edge))?;
        if e.ty != rec.ty || e.tentacles != rec.nodes {
            return Err(format!("leaf {v} disagrees with edge {}", rec.edge));
        }
    }
    let edges: BTreeSet<EdgeId> = sys.graph.edge_ids().collect();
    if seen.keys().copied().collect::<BTreeSet<_>>() != edges {
        return Err("leaves and edges differ".into());
    }
    if let Some((e, n)) = seen.iter().find(|(_, n)| **n > 1) {
        return Err(format!("edge {e} has {n} leaves"));
    }
    Ok(())
}

const VARS: [&str; 4] = ["x", "y", "z", "w"];

/// A random formula over `D(•,•)` and `Dp(•)`, variables may shadow.
pub fn random_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    let pick = |rng: &mut dyn rand::RngCore| Var::new(VARS[rng.gen_range(0..VARS.len())]);
    let k = if depth == 0 {
        rng.gen_range(0..2)
    } else {
        rng.gen_range(0..6)
    };
    match k {
        0 => Formula::Eq(pick(rng), pick(rng)),
        1 => Formula::Top,
        2 => random_formula(rng, depth - 1).not(),
        3 => random_formula(rng, depth - 1).and(random_formula(rng, depth - 1)),
        4 => Formula::ForallEdge {
            ty: "D".into(),
            vars: vec![pick(rng), pick(rng)],
            body: Box::new(random_formula(rng, depth - 1)),
        },
        _ => Formula::ForallEdge {
            ty: "Dp".into(),
            vars: vec![pick(rng)],
            body: Box::new(random_formula(rng, depth - 1)),
        },
    }
}

/// A random graph over the `D`/`Dp` type graph.
pub fn random_d_graph(rng: &mut impl Rng) -> Graph {
    let tg = fixtures::example6().types;
    let mut ids = IdGen::new();
    let mut g = Graph::new();
    let nodes: Vec<NodeId> = (0..rng.gen_range(1..=4))
        .map(|_| g.add_node(ids.node(), "dot"))
        .collect();
    for _ in 0..rng.gen_range(0..=4) {
        if rng.gen_bool(0.6) {
            let t = vec![*nodes.choose(rng).unwrap(), *nodes.choose(rng).unwrap()];
            g.add_edge(ids.edge(), "D", t, true);
        } else {
            g.add_edge(ids.edge(), "Dp", vec![*nodes.choose(rng).unwrap()], true);
        }
    }
    debug_assert!(g.validate(&tg).is_ok());
    g
}

pub fn all_vars() -> Vec<Var> {
    VARS.iter().map(|v| Var::new(v)).collect()
}
