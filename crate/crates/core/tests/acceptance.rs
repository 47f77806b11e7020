//! Acceptance criteria. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion, each with its time budget.

mod common;

use adr_core::bounded::{bounded_equivalent, Bounds};
use adr_core::fixtures::{self, Scenario};
use adr_core::graph::Graph;
use adr_core::ids::{IdGen, NodeId, VertexId};
use adr_core::io::Workspace;
use adr_core::iso::isomorphic;
use adr_core::logic::{parse_formula, satisfies, Assignment, Var};
use adr_core::production::{apply_asserted, apply_production, find_matches, AssertedOutcome, AssertedProduction};
use adr_core::reconfig::{apply_reconfiguration, bow_tie, get_var_tree};
use adr_core::recovery::{
    parse_step, parse_tracked, parseable_subtrees, Decision, ParseMode, RecoverySession, SessionState,
};
use adr_core::tracking::TrackedSystem;
use adr_core::wp::{check_validity_oracle, weakest_precondition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "1 typing of the travel graph and five mutations",
            Duration::from_secs(1),
            typing,
        ),
        (
            "2 logic on the D/Dp graphs, assignment irrelevance",
            Duration::from_secs(10),
            logic,
        ),
        (
            "3 bookFlight applications and the refused asserted one",
            Duration::from_secs(1),
            productions,
        ),
        (
            "4 weakest preconditions and the bounded oracle",
            Duration::from_secs(120),
            wp,
        ),
        (
            "5 tracking forests and the leaf/edge bijection",
            Duration::from_secs(30),
            tracking,
        ),
        (
            "6 cf reconfiguration end to end",
            Duration::from_secs(5),
            reconfiguration,
        ),
        (
            "7 parse round trip on random derivations",
            Duration::from_secs(60),
            parsing,
        ),
        ("8 badServer recovery", Duration::from_secs(5), recovery),
        (
            "9 serialize, reload and replay every scenario",
            Duration::from_secs(30),
            replay,
        ),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = t.elapsed();
        let result = match result {
            Ok(note) if took > limit => Err(format!("{note}; took {took:.2?}, limit {limit:?}")),
            r => r,
        };
        match result {
            Ok(note) => println!("PASS criterion {name} ({took:.2?} of {limit:?}) {note}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({took:.2?} of {limit:?}) {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn typing() -> Outcome {
    let fx = fixtures::example1();
    let tg = &fx.types;
    ensure!(
        fx.graph.validate(tg).is_ok(),
        "the travel graph is rejected: {}",
        fx.graph.validate(tg)
    );
    let fl1 = fx.edge("fl1");
    let mut mutants: Vec<(&str, Graph)> = Vec::new();

    let mut g = fx.graph.clone();
    g.edge_mut(fl1).unwrap().tentacles.pop();
    mutants.push(("arity", g));

    let mut g = fx.graph.clone();
    g.edge_mut(fl1).unwrap().ty = "B".into();
    mutants.push(("node type", g));

    let mut g = fx.graph.clone();
    g.clear_theta(fx.edge("fl2"));
    mutants.push(("missing theta", g));

    let mut g = fx.graph.clone();
    g.edge_mut(fl1).unwrap().tentacles[0] = NodeId(4242);
    mutants.push(("dangling tentacle", g));

    let mut g = fx.graph.clone();
    g.add_node(NodeId(fl1.0), "dot");
    mutants.push(("duplicate id", g));

    for (what, g) in &mutants {
        let report = g.validate(tg);
        ensure!(!report.is_ok(), "{what} mutation accepted");
        let text = report.to_string();
        let expected = match *what {
            "arity" => "arity",
            "node type" => "signature expects `circ`",
            "missing theta" => "replaceability undefined",
            "dangling tentacle" => "missing node",
            _ => "names both a node and an edge",
        };
        ensure!(text.contains(expected), "{what} mutation reported as: {text}");
    }
    Ok(format!("{} mutations rejected", mutants.len()))
}

fn logic() -> Outcome {
    let fx = fixtures::example6();
    let h = Assignment::new();
    ensure!(
        satisfies(&fx.valid, &fx.phi_ex, &h).unwrap(),
        "valid graph does not satisfy the formula"
    );
    ensure!(
        !satisfies(&fx.invalid, &fx.phi_ex, &h).unwrap(),
        "invalid graph satisfies the formula"
    );
    let parsed = parse_formula("forall D(x,y). exists Dp(z). x = z", &fx.types).unwrap();
    ensure!(parsed == fx.phi_ex, "text form parses differently: {parsed}");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vars = common::all_vars();
    for case in 0..1000 {
        let phi = common::random_formula(&mut rng, 4);
        let g = common::random_d_graph(&mut rng);
        let nodes: Vec<NodeId> = g.node_ids().collect();
        let free = phi.free_vars();
        let mut a = Assignment::new();
        let mut b = Assignment::new();
        for v in &vars {
            let n = nodes[rng.gen_range(0..nodes.len())];
            a.set(v.clone(), n);
            let m = if free.contains(v) {
                n
            } else {
                nodes[rng.gen_range(0..nodes.len())]
            };
            b.set(v.clone(), m);
        }
        let (x, y) = (satisfies(&g, &phi, &a).unwrap(), satisfies(&g, &phi, &b).unwrap());
        ensure!(x == y, "case {case}: {phi} depends on a bound or unused variable");
    }
    Ok("1000 random cases".into())
}

fn productions() -> Outcome {
    let style = fixtures::travel();
    let p = style.production("bookFlight").unwrap();
    for (name, fx) in [("example 5", fixtures::example5()), ("example 8", fixtures::example8())] {
        let ms = find_matches(&fx.before, p);
        ensure!(ms.len() == 1, "{name}: {} matches", ms.len());
        let mut ids = IdGen::starting_at(fx.before.max_id() + 1);
        let app = apply_production(&fx.before, p, &ms[0], &mut ids).unwrap();
        ensure!(
            isomorphic(&app.graph, &fx.after, true),
            "{name}: result differs:\n{}",
            app.graph
        );
    }

    let fx = fixtures::example5();
    let pi = AssertedProduction {
        pre: parse_formula("forall Fls(x,y). x != y", &style.types).unwrap(),
        ..AssertedProduction::plain(p.clone())
    };
    let m = &find_matches(&fx.before, p)[0];
    let mut ids = IdGen::starting_at(fx.before.max_id() + 1);
    let out = apply_asserted(&fx.before, &pi, m, &Assignment::new(), &mut ids).unwrap();
    let AssertedOutcome::Violated(v) = out else {
        return Err("the asserted production was applied".into());
    };
    let u1 = fx.before.node_named("u1").unwrap();
    let witness = v
        .failing
        .iter()
        .find(|(e, _)| *e == m.edge)
        .ok_or("no witness at the matched edge")?;
    ensure!(
        witness.1.get(&Var::new("x")) == Some(u1) && witness.1.get(&Var::new("y")) == Some(u1),
        "witness is {:?}",
        witness.1
    );
    Ok("x = y = u1".into())
}

fn wp() -> Outcome {
    let fx = fixtures::example11();
    let pay = fx.style.production("pay").unwrap();
    let w = weakest_precondition(pay, &fx.phi, &BTreeMap::new(), &fx.style.types).map_err(|e| e.to_string())?;
    let expected = parse_formula(
        "no C & forall B(x,y). forall C(z). no C & forall B(x,y). forall C(z). y = z",
        &fx.style.types,
    )
    .unwrap();
    let d = bounded_equivalent(&w.formula, &expected, &fx.style.types, Bounds::edges(4)).unwrap();
    ensure!(
        d.is_none(),
        "wp(pay) = {} differs from the expected formula on {:?}",
        w.formula,
        d
    );

    let mut pairs = 0;
    let mut graphs = 0;
    for (name, ws) in fixtures::workspaces() {
        for post_text in fixtures::postconditions(name) {
            let post = parse_formula(post_text, &ws.style.types).unwrap();
            for p in ws.style.productions() {
                let pre =
                    weakest_precondition(p, &post, &BTreeMap::new(), &ws.style.types).map_err(|e| e.to_string())?;
                let r = check_validity_oracle(p, &pre, &post, &BTreeMap::new(), &ws.style.types, Bounds::edges(4))
                    .map_err(|e| e.to_string())?;
                ensure!(
                    r.counterexamples.is_empty(),
                    "{}: wp({}, {post_text}) = {} has {} counterexamples, first on\n{}",
                    name,
                    p.name,
                    pre.formula,
                    r.counterexamples.len(),
                    r.counterexamples[0].graph
                );
                pairs += 1;
                graphs += r.graphs;
            }
        }
    }
    Ok(format!("wp(pay) = {}; {pairs} pairs, {graphs} graphs", w.formula))
}

/// Expected vertex: edge name, node names, production (None for ↑), children.
struct Exp(&'static str, [&'static str; 2], Option<&'static str>, Vec<Exp>);

fn match_tree(
    sys: &TrackedSystem,
    sc: &Scenario,
    nodes: &BTreeMap<&str, NodeId>,
    v: VertexId,
    e: &Exp,
) -> Result<(), String> {
    let rec = sys.env.env1.get(&v).ok_or(format!("{v} has no edge record"))?;
    let want_nodes: Vec<NodeId> = e.1.iter().map(|n| nodes[n]).collect();
    ensure!(
        rec.edge == sc.edge(e.0) && rec.nodes == want_nodes && rec.ty == "Fl",
        "{v} records {} instead of {}",
        rec.label(&sys.graph),
        e.0
    );
    ensure!(
        sys.env.env2.get(&v).map(String::as_str) == e.2,
        "{v}: production {:?}, expected {:?}",
        sys.env.env2.get(&v),
        e.2
    );
    let kids = sys.forest.children(v);
    ensure!(kids.len() == e.3.len(), "{v} has {} children", kids.len());
    for (k, ke) in kids.iter().zip(&e.3) {
        match_tree(sys, sc, nodes, *k, ke)?;
    }
    Ok(())
}

fn tracking() -> Outcome {
    let sc = fixtures::example14();
    let g0 = sc.snapshots[0].graph.clone();
    let g2 = &sc.system.graph;
    let u3 = g2.edge(sc.edge("f1")).unwrap().tentacles[0];
    let u4 = g2.edge(sc.edge("f3")).unwrap().tentacles[0];
    let mut nodes = BTreeMap::new();
    nodes.insert("u1", g0.node_named("u1").unwrap());
    nodes.insert("u2", g0.node_named("u2").unwrap());
    ensure!(!g0.has_node(u3) && !g0.has_node(u4) && u3 != u4, "u3/u4 are not fresh");
    nodes.insert("u3", u3);
    nodes.insert("u4", u4);

    let bf = Some("browseFlights");
    let t1 = Exp(
        "f",
        ["u1", "u2"],
        bf,
        vec![
            Exp("f1", ["u3", "u2"], None, vec![]),
            Exp("f2", ["u1", "u2"], None, vec![]),
        ],
    );
    let t2 = Exp(
        "f",
        ["u1", "u2"],
        bf,
        vec![
            Exp("f1", ["u3", "u2"], None, vec![]),
            Exp(
                "f2",
                ["u1", "u2"],
                bf,
                vec![
                    Exp("f3", ["u4", "u2"], None, vec![]),
                    Exp("f4", ["u1", "u2"], None, vec![]),
                ],
            ),
        ],
    );
    for (k, exp) in [(1, t1), (2, t2)] {
        let sys = &sc.snapshots[k];
        ensure!(
            sys.forest.roots().len() == 1,
            "T{k} has {} roots",
            sys.forest.roots().len()
        );
        ensure!(sys.forest.len() == 1 + 2 * k, "T{k} has {} vertices", sys.forest.len());
        match_tree(sys, &sc, &nodes, sys.forest.roots()[0], &exp).map_err(|e| format!("T{k}: {e}"))?;
    }

    let style = fixtures::travel();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut steps = 0;
    for run in 0..1000 {
        let mut sys = common::start(common::random_travel_graph(&mut rng));
        common::leaf_edge_bijection(&sys).map_err(|e| format!("run {run}, initial: {e}"))?;
        for _ in 0..rng.gen_range(1..=10) {
            if !common::random_step(&mut sys, &style, &mut rng) {
                break;
            }
            steps += 1;
            common::leaf_edge_bijection(&sys).map_err(|e| format!("run {run}: {e}"))?;
        }
    }
    Ok(format!("1000 sequences, {steps} steps"))
}

fn reconfiguration() -> Outcome {
    for (name, sc, expected, kept) in [
        (
            "example 12",
            fixtures::example12(),
            fixtures::example12_expected as fn(&_) -> Graph,
            &["c"][..],
        ),
        (
            "example 13",
            fixtures::example13(),
            fixtures::example13_expected,
            &["c1", "c2", "f1", "f3"][..],
        ),
    ] {
        let cf = sc.style.rule("cf").unwrap().clone();
        let root = sc.system.forest.roots()[0];
        ensure!(
            bow_tie(&sc.system, &sc.style, &cf.lhs, root),
            "{name}: cf's left side does not match the root"
        );
        let mut sys = sc.system.clone();
        apply_reconfiguration(&mut sys, &sc.style, &cf, root).map_err(|e| format!("{name}: {e}"))?;
        let mut want = expected(&sc.style);
        ensure!(
            isomorphic(&sys.graph, &want, true),
            "{name}: result differs:\n{}",
            sys.graph
        );
        // pin each kept edge to its namesake by giving both a private type
        let mut got = sys.graph.clone();
        for e in kept {
            let id = sc.edge(e);
            ensure!(got.has_edge(id), "{name}: edge {e} lost its identity");
            got.edge_mut(id).unwrap().ty = format!("kept {e}");
            let w = want.edge_named(e).unwrap();
            want.edge_mut(w).unwrap().ty = format!("kept {e}");
        }
        ensure!(
            isomorphic(&got, &want, true),
            "{name}: a kept edge plays a different role after cf"
        );
        sys.check_integrity().map_err(|e| format!("{name}: {e}"))?;
    }

    // variable subtrees of cf's left side on the example 13 forest
    let sc = fixtures::example13();
    let cf = sc.style.rule("cf").unwrap();
    let root = sc.system.forest.roots()[0];
    let leaf = |e: &str| sc.system.leaf_for_edge(sc.edge(e)).unwrap();
    ensure!(
        get_var_tree(&sc.system, &sc.style, &cf.lhs, root, "x") == Some(leaf("f1")),
        "x subtree"
    );
    ensure!(
        get_var_tree(&sc.system, &sc.style, &cf.lhs, root, "y") == Some(leaf("f3")),
        "y subtree"
    );
    let z = get_var_tree(&sc.system, &sc.style, &cf.lhs, root, "z").ok_or("z subtree missing")?;
    ensure!(
        sc.system.env.env2.get(&z).map(String::as_str) == Some("addC"),
        "z subtree is not the addC vertex"
    );
    ensure!(
        sc.system.env.env1[&z].edge == sc.edge("c"),
        "z subtree is rooted at {}",
        sc.system.vertex_label(z)
    );
    let f4_tree = sc.system.forest.roots()[1];
    ensure!(
        !bow_tie(&sc.system, &sc.style, &cf.lhs, f4_tree),
        "cf matches the lone f4 tree"
    );
    let ex14 = fixtures::example14();
    ensure!(
        !bow_tie(&ex14.system, &ex14.style, &cf.lhs, ex14.system.forest.roots()[0]),
        "cf matches a tree without bookF"
    );
    Ok("identities kept".into())
}

fn parsing() -> Outcome {
    let style = fixtures::travel();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parses = 0;
    for run in 0..500 {
        let g0 = common::random_single_edge(&mut rng);
        let ty0 = g0.edges().next().unwrap().1.ty.clone();
        let steps = rng.gen_range(1..=6);
        let (sys, before) = common::random_derivation(g0, &style, steps, &mut rng);

        // undo the derivation from the last production back
        let mut undo = sys.clone();
        let produced: Vec<VertexId> = undo
            .events
            .iter()
            .map(|ev| match ev {
                adr_core::tracking::Event::Production { edge, .. } => *edge,
                _ => unreachable!(),
            })
            .zip(&before)
            .map(|(e, snap)| snap.leaf_for_edge(e).unwrap())
            .collect();
        for (k, v) in produced.iter().enumerate().rev() {
            let mut ids = undo.ids.clone();
            let parsed = parse_step(&undo, &style, *v, ParseMode::Scoped, &mut ids)
                .map_err(|e| format!("run {run}, step {k}: {e}"))?;
            ensure!(
                isomorphic(&parsed.graph, &before[k].graph, true),
                "run {run}: parsing step {k} gives\n{}\ninstead of\n{}",
                parsed.graph,
                before[k].graph
            );
            parse_tracked(&mut undo, &style, *v, ParseMode::Scoped).map_err(|e| e.to_string())?;
            common::leaf_edge_bijection(&undo).map_err(|e| format!("run {run}: {e}"))?;
            parses += 1;
        }

        // fold in arbitrary order until one edge is left
        let mut sys = sys;
        loop {
            let roots = sys.forest.roots().to_vec();
            let options = parseable_subtrees(&sys, &roots);
            if options.is_empty() {
                break;
            }
            let v = options[rng.gen_range(0..options.len())];
            parse_tracked(&mut sys, &style, v, ParseMode::Scoped).map_err(|e| e.to_string())?;
        }
        ensure!(
            sys.graph.edge_count() == 1,
            "run {run}: parsing stops at {} edges",
            sys.graph.edge_count()
        );
        let (_, e) = sys.graph.edges().next().unwrap();
        ensure!(e.ty == ty0, "run {run}: parsed to {} instead of {ty0}", e.ty);
    }
    Ok(format!("500 systems, {parses} inverse steps"))
}

fn recovery() -> Outcome {
    let sc = fixtures::example16();
    let inv = &sc.invariant;
    let mut sys = sc.system.clone();
    ensure!(
        !satisfies(&sys.graph, inv, &Assignment::new()).unwrap(),
        "the invariant holds after badServer"
    );
    let mut s = RecoverySession::start(&sys, inv.clone()).map_err(|e| e.to_string())?;
    ensure!(s.state == SessionState::Violated, "session starts {:?}", s.state);
    s.decide(&mut sys, &sc.style, Decision::Propose)
        .map_err(|e| e.to_string())?;
    let f = sc.edge("f");
    ensure!(
        s.candidates.iter().any(|c| c.production == "goodServer" && c.edge == f),
        "candidates: {:?}",
        s.candidates
    );
    s.decide(
        &mut sys,
        &sc.style,
        Decision::AcceptProduction {
            production: "goodServer".into(),
            edge: f,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(s.state == SessionState::Recovered, "ends {:?}", s.state);
    ensure!(
        satisfies(&sys.graph, inv, &Assignment::new()).unwrap(),
        "invariant fails after recovery"
    );
    sys.check_integrity().map_err(|e| e.to_string())?;

    for sc in [fixtures::example16(), fixtures::two_servers()] {
        let mut sys = sc.system.clone();
        let mut s = RecoverySession::start(&sys, sc.invariant.clone()).map_err(|e| e.to_string())?;
        s.run_auto(&mut sys, &sc.style).map_err(|e| e.to_string())?;
        ensure!(
            s.state == SessionState::Recovered,
            "{}: auto mode ends {:?}",
            sc.name,
            s.state
        );
        ensure!(
            satisfies(&sys.graph, &sc.invariant, &Assignment::new()).unwrap(),
            "{}: invariant fails after auto mode",
            sc.name
        );
    }
    Ok("goodServer accepted; auto mode recovers".into())
}

fn replay() -> Outcome {
    let mut systems = 0;
    for (name, ws) in fixtures::workspaces() {
        let text = ws.to_json();
        let back = Workspace::from_json(&text).map_err(|e| format!("{name}: {e}"))?;
        for (sys_name, entry) in &ws.systems {
            let got = back
                .systems
                .get(sys_name)
                .ok_or(format!("{name}: {sys_name} missing"))?;
            ensure!(
                got.system.graph.identical(&entry.system.graph),
                "{name}/{sys_name}: graph differs"
            );
            ensure!(
                got.system.forest == entry.system.forest,
                "{name}/{sys_name}: forest differs"
            );
            ensure!(
                got.system.env == entry.system.env,
                "{name}/{sys_name}: environment differs"
            );
            ensure!(got.session == entry.session, "{name}/{sys_name}: session differs");
            systems += 1;
        }
        ensure!(back.to_json() == text, "{name}: serialization is not canonical");
    }
    for sc in fixtures::scenarios() {
        let sys = &sc.system;
        let again = TrackedSystem::replay(sys.initial().clone(), sys.id_base(), &sys.events, &sc.style)
            .map_err(|e| format!("{}: {e}", sc.name))?;
        ensure!(&again == sys, "{}: replay differs", sc.name);
        if let Some(log) = &sc.session {
            let (after, session) = log
                .replay(sys.initial().clone(), sys.id_base(), &sys.events, &sc.style)
                .map_err(|e| format!("{}: {e}", sc.name))?;
            ensure!(&after == sys, "{}: session replay differs", sc.name);
            ensure!(
                session.state.is_final(),
                "{}: session ends {:?}",
                sc.name,
                session.state
            );
        }
    }
    Ok(format!("{systems} systems"))
}
