//! Worked examples: type graphs, styles, graphs and tracked scenarios.
//! Scenarios are produced by running the engine (productions, rules,
//! recovery sessions), never written down by hand.

use crate::graph::Graph;
use crate::ids::{EdgeId, IdGen, NodeId, VertexId};
use crate::io::{LiveSession, Workspace};
use crate::logic::{parse_formula, Formula};
use crate::reconfig::apply_reconfiguration;
use crate::recovery::{Decision, RecoverySession, SessionLog};
use crate::style::{build_graph, EdgeSpec, Style};
use crate::tracking::TrackedSystem;
use crate::typegraph::TypeGraph;
use std::collections::BTreeMap;

fn named_edges(g: &Graph) -> BTreeMap<String, EdgeId> {
    g.edges()
        .filter_map(|(id, e)| e.name.clone().map(|n| (n, id)))
        .collect()
}

/// A typed graph with its type graph.
#[derive(Clone, Debug)]
pub struct Typed {
    pub types: TypeGraph,
    pub graph: Graph,
}

impl Typed {
    pub fn edge(&self, name: &str) -> EdgeId {
        self.graph
            .edge_named(name)
            .unwrap_or_else(|| panic!("no edge `{name}`"))
    }

    pub fn node(&self, name: &str) -> NodeId {
        self.graph
            .node_named(name)
            .unwrap_or_else(|| panic!("no node `{name}`"))
    }
}

/// The travel-agency type graph: `C(•)`, `B(•,∘)`, every other type `(•,•)`.
pub fn travel_types() -> TypeGraph {
    let mut tg = TypeGraph::new()
        .with_node_type("dot")
        .unwrap()
        .with_node_type("circ")
        .unwrap();
    tg.add_edge_type("C", vec!["dot".into()]).unwrap();
    tg.add_edge_type("B", vec!["dot".into(), "circ".into()]).unwrap();
    for t in ["FF", "Fls", "Fl", "BF", "P", "PF", "Client"] {
        tg.add_edge_type(t, vec!["dot".into(), "dot".into()]).unwrap();
    }
    tg
}

/// `ff:FF(u2,u1)` (not replaceable), `fl1:Fls(u3,u2)`, `fl2:Fls(u4,u2)`.
pub fn example1() -> Typed {
    let types = travel_types();
    let mut ids = IdGen::new();
    let graph = build_graph(
        &types,
        &mut ids,
        &[
            ("ff", "FF", &["u2", "u1"], false),
            ("fl1", "Fls", &["u3", "u2"], true),
            ("fl2", "Fls", &["u4", "u2"], true),
        ],
    )
    .unwrap();
    Typed { types, graph }
}

/// The travel style with its productions and the `cf` rule.
pub fn travel() -> Style {
    let mut s = Style::new(travel_types());
    s.define(
        "bookFlight",
        ("Fls", &["a", "b"]),
        &[("fls", "Fl", &["u", "u2"], true), ("pa", "P", &["u1", "u"], true)],
        &[("a", "u1"), ("b", "u2")],
    )
    .unwrap();
    s.define(
        "browseFlights",
        ("Fl", &["a", "b"]),
        &[("f1", "Fl", &["x3", "x2"], true), ("f2", "Fl", &["x1", "x2"], true)],
        &[("a", "x1"), ("b", "x2")],
    )
    .unwrap();
    s.define(
        "bookF",
        ("Fl", &["a", "b"]),
        &[("f", "Fl", &["x", "x2"], true), ("c", "Client", &["x1", "x"], true)],
        &[("a", "x1"), ("b", "x2")],
    )
    .unwrap();
    s.define(
        "addC",
        ("Client", &["a", "b"]),
        &[
            ("c1", "Client", &["x1", "x2"], true),
            ("c2", "Client", &["x1", "x2"], true),
        ],
        &[("a", "x1"), ("b", "x2")],
    )
    .unwrap();
    s.define("leave", ("Client", &["a", "b"]), &[], &[("a", "x1"), ("b", "x2")])
        .unwrap();
    s.alias("brF", "browseFlights").unwrap();
    s.define_rule("cf : brF(x, bookF(y, z)) -> brF(bookF(x, z), y)")
        .unwrap();
    s
}

/// Before and after one application of `bookFlight`.
#[derive(Clone, Debug)]
pub struct Rewrite {
    pub before: Graph,
    pub after: Graph,
}

/// `ff:FF(u1,u)` next to a looping `fls:Fls(u1,u1)`.
pub fn example5() -> Rewrite {
    let tg = travel_types();
    let mut ids = IdGen::new();
    let before = build_graph(
        &tg,
        &mut ids,
        &[("ff", "FF", &["u1", "u"], false), ("fls", "Fls", &["u1", "u1"], true)],
    )
    .unwrap();
    let after = build_graph(
        &tg,
        &mut IdGen::new(),
        &[
            ("ff", "FF", &["u1", "u"], false),
            ("f", "Fl", &["u2", "u1"], true),
            ("p", "P", &["u1", "u2"], true),
        ],
    )
    .unwrap();
    Rewrite { before, after }
}

/// `fls:Fls(u3,u1)` next to `ff:FF(u1,u)`.
pub fn example8() -> Rewrite {
    let tg = travel_types();
    let before = build_graph(
        &tg,
        &mut IdGen::new(),
        &[("fls", "Fls", &["u3", "u1"], true), ("ff", "FF", &["u1", "u"], false)],
    )
    .unwrap();
    let after = build_graph(
        &tg,
        &mut IdGen::new(),
        &[
            ("f", "Fl", &["u2", "u1"], true),
            ("p", "P", &["u3", "u2"], true),
            ("ff", "FF", &["u1", "u"], false),
        ],
    )
    .unwrap();
    Rewrite { before, after }
}

/// Two graphs telling apart `forall D(x,y). exists Dp(z). x = z`.
#[derive(Clone, Debug)]
pub struct LogicExample {
    pub types: TypeGraph,
    pub valid: Graph,
    pub invalid: Graph,
    pub phi_ex: Formula,
}

pub fn example6() -> LogicExample {
    let types = TypeGraph::new()
        .with_node_type("dot")
        .unwrap()
        .with_edge_type("D", &["dot", "dot"])
        .unwrap()
        .with_edge_type("Dp", &["dot"])
        .unwrap();
    let valid = build_graph(
        &types,
        &mut IdGen::new(),
        &[
            ("d1", "D", &["u1", "u2"], true),
            ("d2", "D", &["u1", "u4"], true),
            ("d'", "Dp", &["u1"], true),
        ],
    )
    .unwrap();
    let invalid = build_graph(
        &types,
        &mut IdGen::new(),
        &[
            ("d1", "D", &["u1", "u2"], true),
            ("d2", "D", &["u3", "u4"], true),
            ("d'", "Dp", &["u1"], true),
        ],
    )
    .unwrap();
    let phi_ex = Formula::forall("D", &["x", "y"], Formula::exists("Dp", &["z"], Formula::eq("x", "z")));
    LogicExample {
        types,
        valid,
        invalid,
        phi_ex,
    }
}

/// The payment style: `pay` turns `P(v)` into a terminal `B(v,u)`.
#[derive(Clone, Debug)]
pub struct PayExample {
    pub style: Style,
    pub phi: Formula,
}

pub fn example11() -> PayExample {
    let types = TypeGraph::new()
        .with_node_type("dot")
        .unwrap()
        .with_node_type("circ")
        .unwrap()
        .with_edge_type("B", &["dot", "circ"])
        .unwrap()
        .with_edge_type("C", &["dot"])
        .unwrap()
        .with_edge_type("P", &["dot"])
        .unwrap();
    let mut style = Style::new(types);
    style
        .define("pay", ("P", &["v"]), &[("b", "B", &["u1", "u"], false)], &[("v", "u1")])
        .unwrap();
    let phi = parse_formula("forall B(x,y). forall C(z). y = z", &style.types).unwrap();
    PayExample { style, phi }
}

/// A tracked system together with how it was produced.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub style: Style,
    pub system: TrackedSystem,
    /// the system after initialisation and after every event
    pub snapshots: Vec<TrackedSystem>,
    pub invariant: Formula,
    pub session: Option<SessionLog>,
    names: BTreeMap<String, EdgeId>,
}

impl Scenario {
    fn start(name: &str, style: Style, edges: &[EdgeSpec]) -> Self {
        let mut ids = IdGen::new();
        let g = build_graph(&style.types, &mut ids, edges).unwrap();
        let names = named_edges(&g);
        let system = TrackedSystem::init(g, ids.peek()).unwrap();
        Scenario {
            name: name.to_string(),
            style,
            snapshots: vec![system.clone()],
            system,
            invariant: Formula::Top,
            session: None,
            names,
        }
    }

    fn step(mut self, production: &str, at: &str, created: &[&str]) -> Self {
        let e = self.edge(at);
        let step = self.system.record_production(&self.style, production, e).unwrap();
        assert_eq!(
            step.created.len(),
            created.len(),
            "{production} creates {} edges",
            step.created.len()
        );
        for (n, id) in created.iter().zip(step.created) {
            self.names.insert(n.to_string(), id);
        }
        self.snapshots.push(self.system.clone());
        self
    }

    fn reconfigure(mut self, rule: &str, at: VertexId) -> Self {
        let r = self.style.rule(rule).unwrap().clone();
        apply_reconfiguration(&mut self.system, &self.style, &r, at).unwrap();
        self.snapshots.push(self.system.clone());
        self
    }

    fn reconfigure_first_root(self, rule: &str) -> Self {
        let root = self.system.forest.roots()[0];
        self.reconfigure(rule, root)
    }

    /// Runs a recovery session and keeps its log.
    fn recover(mut self, decide: impl FnOnce(&mut RecoverySession, &mut TrackedSystem, &Style)) -> Self {
        let started_at = self.system.events.len();
        let mut sys = self.system.clone();
        let mut s = RecoverySession::start(&sys, self.invariant.clone()).unwrap();
        decide(&mut s, &mut sys, &self.style);
        self.session = Some(SessionLog {
            invariant: self.invariant.clone(),
            started_at,
            decisions: s.decisions.clone(),
        });
        self.system = sys;
        self.snapshots.push(self.system.clone());
        self
    }

    fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn edge(&self, name: &str) -> EdgeId {
        *self
            .names
            .get(name)
            .unwrap_or_else(|| panic!("scenario {} has no edge `{name}`", self.name))
    }

    pub fn edge_names(&self) -> &BTreeMap<String, EdgeId> {
        &self.names
    }
}

/// `f:Fl(u1,u2)`, rewritten twice by `browseFlights` (at `f`, then `f2`).
pub fn example14() -> Scenario {
    Scenario::start("example14", travel(), &[("f", "Fl", &["u1", "u2"], true)])
        .step("browseFlights", "f", &["f1", "f2"])
        .step("browseFlights", "f2", &["f3", "f4"])
}

/// A system on which `cf` applies once; its client edge is `c`.
pub fn example12() -> Scenario {
    Scenario::start("example12", travel(), &[("f", "Fl", &["u1", "u2"], true)])
        .step("brF", "f", &["f1", "fa"])
        .step("bookF", "fa", &["f2", "c"])
}

/// `example12` after `cf`: `f1(a,u2)`, `c(b,a)`, `f2(u1,u2)`.
pub fn example12_expected(style: &Style) -> Graph {
    build_graph(
        &style.types,
        &mut IdGen::new(),
        &[
            ("f1", "Fl", &["a", "u2"], true),
            ("c", "Client", &["b", "a"], true),
            ("f2", "Fl", &["u1", "u2"], true),
        ],
    )
    .unwrap()
}

/// The forest the `cf` walkthrough starts from, plus an unrelated `f4`.
pub fn example13() -> Scenario {
    Scenario::start(
        "example13",
        travel(),
        &[("f", "Fl", &["u1", "u2"], true), ("f4", "Fl", &["u5", "u2"], true)],
    )
    .step("brF", "f", &["f1", "f2"])
    .step("bookF", "f2", &["f3", "c"])
    .step("addC", "c", &["c1", "c2"])
}

/// `example13` after `cf`: the clients hang off `f1`'s first node.
pub fn example13_expected(style: &Style) -> Graph {
    build_graph(
        &style.types,
        &mut IdGen::new(),
        &[
            ("f1", "Fl", &["a", "u2"], true),
            ("f3", "Fl", &["u1", "u2"], true),
            ("c1", "Client", &["b", "a"], true),
            ("c2", "Client", &["b", "a"], true),
            ("f4", "Fl", &["u5", "u2"], true),
        ],
    )
    .unwrap()
}

/// Servers and clients: `deploy` a system, bring servers up or down,
/// repair a failed one.
pub fn server_style() -> Style {
    let types = TypeGraph::new()
        .with_node_type("dot")
        .unwrap()
        .with_edge_type("Sys", &["dot"])
        .unwrap()
        .with_edge_type("Srv", &["dot", "dot"])
        .unwrap()
        .with_edge_type("S", &["dot", "dot"])
        .unwrap()
        .with_edge_type("F", &["dot", "dot"])
        .unwrap()
        .with_edge_type("C", &["dot"])
        .unwrap();
    let mut s = Style::new(types);
    s.define(
        "deploy",
        ("Sys", &["a"]),
        &[
            ("srv1", "Srv", &["s1", "a"], true),
            ("c", "C", &["a"], false),
            ("srv2", "Srv", &["s2", "p"], true),
        ],
        &[("a", "a")],
    )
    .unwrap();
    s.define(
        "up",
        ("Srv", &["x", "y"]),
        &[("s", "S", &["x", "y"], true)],
        &[("x", "x"), ("y", "y")],
    )
    .unwrap();
    s.define(
        "down",
        ("Srv", &["x", "y"]),
        &[("f", "F", &["x", "y"], true)],
        &[("x", "x"), ("y", "y")],
    )
    .unwrap();
    s.define(
        "goodServer",
        ("F", &["x", "y"]),
        &[("s", "S", &["x", "y"], true)],
        &[("x", "x"), ("y", "y")],
    )
    .unwrap();
    s.define_rule("badServer : deploy(up(x), c, down(y)) -> deploy(down(y), c, up(x))")
        .unwrap();
    s
}

/// Every client is attached to a working server.
pub const SERVER_INVARIANT: &str = "forall C(x). exists S(y,z). x = z";

/// A deployed system whose servers were swapped by `badServer`: the
/// client now sits on the failed server `f`.
pub fn example16() -> Scenario {
    let style = server_style();
    let invariant = parse_formula(SERVER_INVARIANT, &style.types).unwrap();
    let mut sc = Scenario::start("example16", style, &[("sys", "Sys", &["a"], true)])
        .step("deploy", "sys", &["srv1", "c", "srv2"])
        .step("up", "srv1", &["s"])
        .step("down", "srv2", &["f"])
        .reconfigure_first_root("badServer");
    sc.invariant = invariant;
    sc
}

/// Two clients on two failed servers: one repair alone never suffices.
pub fn two_servers() -> Scenario {
    let style = server_style();
    let invariant = parse_formula(SERVER_INVARIANT, &style.types).unwrap();
    let mut sc = Scenario::start(
        "two_servers",
        style,
        &[
            ("f1", "F", &["s1", "a"], true),
            ("c1", "C", &["a"], false),
            ("f2", "F", &["s2", "b"], true),
            ("c2", "C", &["b"], false),
        ],
    );
    sc.invariant = invariant;
    sc
}

/// Every scenario in its final form, including reconfigurations and
/// recovery sessions.
pub fn scenarios() -> Vec<Scenario> {
    let ex16 = example16();
    let f = ex16.edge("f");
    vec![
        example14(),
        example12().named("example12_cf").reconfigure_first_root("cf"),
        example13().named("example13_cf").reconfigure_first_root("cf"),
        ex16.named("example16_repair").recover(|s, sys, style| {
            s.decide(sys, style, Decision::Propose).unwrap();
            s.decide(
                sys,
                style,
                Decision::AcceptProduction {
                    production: "goodServer".into(),
                    edge: f,
                },
            )
            .unwrap();
        }),
        two_servers()
            .named("two_servers_auto")
            .recover(|s, sys, style| s.run_auto(sys, style).unwrap()),
        example16().named("example16_parse").recover(|s, sys, style| {
            s.decide(sys, style, Decision::Propose).unwrap();
            s.decide(sys, style, Decision::RequestParse).unwrap();
            let v = s.subtrees[0];
            s.decide(sys, style, Decision::Parse { vertex: v }).unwrap();
            s.run_auto(sys, style).unwrap();
        }),
    ]
}

impl Scenario {
    /// The system and, when the scenario ran one, its session rebuilt from the log.
    pub fn entry(&self) -> (TrackedSystem, Option<LiveSession>) {
        let session = self.session.as_ref().map(|log| {
            let sys = &self.system;
            let (_, session) = log
                .replay(sys.initial().clone(), sys.id_base(), &sys.events, &self.style)
                .expect("fixture sessions replay");
            LiveSession {
                started_at: log.started_at,
                session,
            }
        });
        (self.system.clone(), session)
    }
}

fn plain(g: Graph) -> TrackedSystem {
    let base = g.max_id() + 1;
    TrackedSystem::init(g, base).unwrap()
}

/// The fixture workspaces by file stem: `travel`, `servers`, `payment`.
pub fn workspaces() -> Vec<(&'static str, Workspace)> {
    let mut travel_ws = Workspace::new(travel());
    travel_ws
        .insert_system("example1", plain(example1().graph), None)
        .unwrap();
    travel_ws
        .insert_system("example5", plain(example5().before), None)
        .unwrap();
    travel_ws
        .insert_system("example8", plain(example8().before), None)
        .unwrap();
    travel_ws.insert_system("example12", example12().system, None).unwrap();
    travel_ws.insert_system("example13", example13().system, None).unwrap();

    let mut servers = Workspace::new(server_style());
    servers.invariant = Some(parse_formula(SERVER_INVARIANT, &servers.style.types).unwrap());
    servers.insert_system("example16", example16().system, None).unwrap();
    servers
        .insert_system("two_servers", two_servers().system, None)
        .unwrap();

    for sc in scenarios() {
        let ws = if sc.style == travel_ws.style {
            &mut travel_ws
        } else {
            &mut servers
        };
        let (sys, session) = sc.entry();
        ws.insert_system(&sc.name, sys, session).unwrap();
    }

    let ex11 = example11();
    let mut payment = Workspace::new(ex11.style);
    payment.invariant = Some(ex11.phi);
    vec![("travel", travel_ws), ("servers", servers), ("payment", payment)]
}

/// Closed postconditions checked against every production of the fixture
/// workspace with the same name.
pub fn postconditions(workspace: &str) -> &'static [&'static str] {
    match workspace {
        "travel" => &[
            "forall Fls(x,y). x != y",
            "no Fl",
            "forall Fl(x,y). exists P(z,w). w = x",
            "forall Client(x,y). exists Fl(z,w). z = y",
        ],
        "servers" => &[SERVER_INVARIANT, "no F", "forall S(x,y). forall F(z,w). y != w"],
        "payment" => &[
            "forall B(x,y). forall C(z). y = z",
            "no B",
            "forall P(x). exists C(y). x = y",
        ],
        _ => &[],
    }
}
