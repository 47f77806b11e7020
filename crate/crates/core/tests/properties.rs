mod common;

use adr_core::bounded::{bounded_equivalent, Bounds};
use adr_core::fixtures;
use adr_core::graph::{Edge, Graph, Node};
use adr_core::ids::{EdgeId, NodeId};
use adr_core::io::Workspace;
use adr_core::iso::isomorphic;
use adr_core::logic::{parse_formula, Formula};
use adr_core::reconfig::{apply_reconfiguration, matches};
use adr_core::tracking::TrackedSystem;
use adr_core::wp::weakest_precondition;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Renames every id by `offset` and reverses the edge order.
fn renamed(g: &Graph, offset: u64) -> Graph {
    let mut h = Graph::new();
    for (id, n) in g.nodes() {
        h.insert_node(
            NodeId(id.0 + offset),
            Node {
                name: None,
                ..n.clone()
            },
        );
    }
    let edges: Vec<_> = g.edges().collect();
    for (id, e) in edges.into_iter().rev() {
        let edge = Edge {
            tentacles: e.tentacles.iter().map(|n| NodeId(n.0 + offset)).collect(),
            name: None,
            ..e.clone()
        };
        h.insert_edge(EdgeId(id.0 + offset), edge, g.theta_entry(id));
    }
    h
}

fn derived(seed: u64, steps: usize) -> TrackedSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = common::random_travel_graph(&mut rng);
    common::random_derivation(g0, &fixtures::travel(), steps, &mut rng).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn isomorphism_ignores_ids_and_order(seed in any::<u64>(), steps in 0usize..6, offset in 1u64..1000) {
        let sys = derived(seed, steps);
        let h = renamed(&sys.graph, offset);
        prop_assert!(isomorphic(&sys.graph, &h, true));
        prop_assert!(isomorphic(&h, &sys.graph, true));
    }

    #[test]
    fn flipping_theta_breaks_isomorphism(seed in any::<u64>(), steps in 0usize..6) {
        let sys = derived(seed, steps);
        let mut h = sys.graph.clone();
        let first = h.edge_ids().next();
        prop_assume!(first.is_some());
        let e = first.unwrap();
        let t = h.theta(e);
        h.set_theta(e, !t);
        prop_assert!(!isomorphic(&sys.graph, &h, true));
        prop_assert!(isomorphic(&sys.graph, &h, false));
    }

    #[test]
    fn replay_is_deterministic(seed in any::<u64>(), steps in 0usize..10) {
        let sys = derived(seed, steps);
        let again = TrackedSystem::replay(sys.initial().clone(), sys.id_base(), &sys.events, &fixtures::travel()).unwrap();
        prop_assert_eq!(&again, &sys);
        prop_assert_eq!(sys.current_graph().unwrap(), sys.graph.clone());
    }

    #[test]
    fn workspace_round_trip(seed in any::<u64>(), steps in 0usize..8) {
        let mut ws = Workspace::new(fixtures::travel());
        ws.insert_system("random", derived(seed, steps), None).unwrap();
        let text = ws.to_json();
        let back = Workspace::from_json(&text).unwrap();
        prop_assert_eq!(&back, &ws);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn reconfiguration_keeps_every_edge(seed in any::<u64>(), steps in 2usize..12) {
        let style = fixtures::travel();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g0 = common::random_single_edge(&mut rng);
        let (mut sys, _) = common::random_derivation(g0, &style, steps, &mut rng);
        let cf = style.rule("cf").unwrap().clone();
        for v in matches(&sys, &style, &cf.lhs) {
            if !sys.forest.contains(v) {
                continue;
            }
            let before: BTreeSet<EdgeId> = sys.graph.edge_ids().collect();
            apply_reconfiguration(&mut sys, &style, &cf, v).unwrap();
            let after: BTreeSet<EdgeId> = sys.graph.edge_ids().collect();
            prop_assert_eq!(before, after);
            prop_assert!(sys.graph.validate(&style.types).is_ok());
            common::leaf_edge_bijection(&sys).map_err(TestCaseError::fail)?;
            sys.check_integrity().map_err(|e| TestCaseError::fail(e.to_string()))?;
        }
    }
}

#[test]
fn wp_distributes_over_conjunction() {
    let style = fixtures::travel();
    let posts: Vec<Formula> = [
        "forall Fls(x,y). x != y",
        "no Fl",
        "forall Client(x,y). exists Fl(z,w). z = y",
    ]
    .iter()
    .map(|t| parse_formula(t, &style.types).unwrap())
    .collect();
    let none = BTreeMap::new();
    for p in style.productions() {
        for a in &posts {
            for b in &posts {
                let both = weakest_precondition(p, &a.clone().and(b.clone()), &none, &style.types).unwrap();
                let wa = weakest_precondition(p, a, &none, &style.types).unwrap();
                let wb = weakest_precondition(p, b, &none, &style.types).unwrap();
                let split = wa.formula.and(wb.formula);
                let d = bounded_equivalent(&both.formula, &split, &style.types, Bounds::edges(3)).unwrap();
                assert!(d.is_none(), "{}: wp({a} & {b}) differs on {d:?}", p.name);
            }
        }
    }
}

#[test]
fn wp_of_top_is_top() {
    for (_, ws) in fixtures::workspaces() {
        for p in ws.style.productions() {
            let w = weakest_precondition(p, &Formula::Top, &BTreeMap::new(), &ws.style.types).unwrap();
            assert_eq!(w.formula, Formula::Top, "{}", p.name);
        }
    }
}
