//! Workspace files: a type graph, productions, rules, an invariant and
//! tracked systems, as JSON. Systems are stored as their initial graph plus
//! event log; loading replays the log and checks the stored snapshot.

use crate::graph::{Edge, Graph, Node};
use crate::ids::{EdgeId, NodeId, VertexId};
use crate::logic::{parse_formula, Formula};
use crate::production::Production;
use crate::recovery::{Decision, RecoverySession, SessionLog};
use crate::style::Style;
use crate::tracking::{EdgeRecord, Event, TrackedSystem};
use crate::typegraph::TypeGraph;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("{field}: {detail}")]
    Schema { field: String, detail: String },
    #[error("system `{system}`: {detail}")]
    Replay { system: String, detail: String },
}

fn schema(field: impl Into<String>, detail: impl ToString) -> IoError {
    IoError::Schema {
        field: field.into(),
        detail: detail.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: NodeId,
    pub tau: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: EdgeId,
    pub tau: String,
    pub t: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Nodes, then edges in graph order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl From<&Graph> for GraphDoc {
    fn from(g: &Graph) -> Self {
        GraphDoc {
            nodes: g
                .nodes()
                .map(|(id, n)| NodeDoc {
                    id,
                    tau: n.ty.clone(),
                    name: n.name.clone(),
                })
                .collect(),
            edges: g
                .edges()
                .map(|(id, e)| EdgeDoc {
                    id,
                    tau: e.ty.clone(),
                    t: e.tentacles.clone(),
                    theta: g.theta_entry(id),
                    name: e.name.clone(),
                })
                .collect(),
        }
    }
}

impl GraphDoc {
    /// Rejects repeated ids; typing is left to validation.
    pub fn to_graph(&self, field: &str) -> Result<Graph, IoError> {
        let mut g = Graph::new();
        let mut seen = std::collections::BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !seen.insert(n.id.0) {
                return Err(schema(
                    format!("{field}.nodes[{i}]"),
                    format!("id {} used twice", n.id.0),
                ));
            }
            g.insert_node(
                n.id,
                Node {
                    ty: n.tau.clone(),
                    name: n.name.clone(),
                },
            );
        }
        for (i, e) in self.edges.iter().enumerate() {
            if !seen.insert(e.id.0) {
                return Err(schema(
                    format!("{field}.edges[{i}]"),
                    format!("id {} used twice", e.id.0),
                ));
            }
            g.insert_edge(
                e.id,
                Edge {
                    ty: e.tau.clone(),
                    tentacles: e.t.clone(),
                    name: e.name.clone(),
                },
                e.theta,
            );
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionDoc {
    pub name: String,
    pub lhs: GraphDoc,
    pub rhs: GraphDoc,
    /// pairs (left node, right node)
    pub interface: Vec<(NodeId, NodeId)>,
    pub rhs_order: Vec<EdgeId>,
}

/// One forest vertex; `env1`/`env2` are absent on tombstones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub id: VertexId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<VertexId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<VertexId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env1: Option<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env2: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

/// The forest in preorder, tree by tree.
pub fn forest_doc(sys: &TrackedSystem) -> Vec<VertexDoc> {
    sys.forest
        .preorder()
        .into_iter()
        .map(|v| VertexDoc {
            id: v,
            parent: sys.forest.parent(v),
            children: sys.forest.children(v).to_vec(),
            env1: sys.env.env1.get(&v).cloned(),
            env2: sys.env.env2.get(&v).cloned(),
            synthetic: sys.env.synthetic.contains(&v),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub graph: GraphDoc,
    pub forest: Vec<VertexDoc>,
}

impl From<&TrackedSystem> for SnapshotDoc {
    fn from(sys: &TrackedSystem) -> Self {
        SnapshotDoc {
            graph: GraphDoc::from(&sys.graph),
            forest: forest_doc(sys),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDoc {
    pub invariant: String,
    /// number of events that preceded the session
    pub started_at: usize,
    pub decisions: Vec<Decision>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub name: String,
    pub initial: GraphDoc,
    pub id_base: u64,
    #[serde(default)]
    pub events: Vec<Event>,
    /// checked against the replay when present
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkspaceDoc {
    pub format: u32,
    pub types: TypeGraph,
    pub productions: Vec<ProductionDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub rules: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant: Option<String>,
    #[serde(default)]
    pub systems: Vec<SystemDoc>,
}

/// A recovery session and the point in the event log where it started.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveSession {
    pub started_at: usize,
    pub session: RecoverySession,
}

impl LiveSession {
    pub fn log(&self) -> SessionLog {
        SessionLog {
            invariant: self.session.invariant.clone(),
            started_at: self.started_at,
            decisions: self.session.decisions.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemEntry {
    pub system: TrackedSystem,
    pub session: Option<LiveSession>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workspace {
    pub style: Style,
    pub invariant: Option<Formula>,
    pub systems: IndexMap<String, SystemEntry>,
}

impl Workspace {
    pub fn new(style: Style) -> Self {
        Workspace {
            style,
            invariant: None,
            systems: IndexMap::new(),
        }
    }

    /// Adds or replaces a system. Its graph must validate against the type graph.
    pub fn insert_system(
        &mut self,
        name: &str,
        system: TrackedSystem,
        session: Option<LiveSession>,
    ) -> Result<(), IoError> {
        let report = system.graph.validate(&self.style.types);
        if !report.is_ok() {
            return Err(schema(format!("systems.{name}"), report));
        }
        self.systems.insert(name.to_string(), SystemEntry { system, session });
        Ok(())
    }

    pub fn to_doc(&self) -> WorkspaceDoc {
        WorkspaceDoc {
            format: FORMAT_VERSION,
            types: self.style.types.clone(),
            productions: self
                .style
                .productions()
                .map(|p| ProductionDoc {
                    name: p.name.clone(),
                    lhs: GraphDoc::from(&p.lhs),
                    rhs: GraphDoc::from(&p.rhs),
                    interface: p.interface.iter().map(|(l, r)| (*l, *r)).collect(),
                    rhs_order: p.rhs_order.clone(),
                })
                .collect(),
            aliases: self.style.aliases().clone(),
            rules: self.style.rules().map(|r| r.to_string()).collect(),
            invariant: self.invariant.as_ref().map(|f| f.to_string()),
            systems: self
                .systems
                .iter()
                .map(|(name, e)| SystemDoc {
                    name: name.clone(),
                    initial: GraphDoc::from(e.system.initial()),
                    id_base: e.system.id_base(),
                    events: e.system.events.clone(),
                    snapshot: Some(SnapshotDoc::from(&e.system)),
                    session: e.session.as_ref().map(|s| SessionDoc {
                        invariant: s.session.invariant.to_string(),
                        started_at: s.started_at,
                        decisions: s.session.decisions.clone(),
                    }),
                })
                .collect(),
        }
    }

    /// Rebuilds the style, replays every system and checks snapshots.
    pub fn from_doc(doc: &WorkspaceDoc) -> Result<Self, IoError> {
        if doc.format != FORMAT_VERSION {
            return Err(IoError::Version(doc.format));
        }
        doc.types.check().map_err(|e| schema("types", e))?;
        let mut style = Style::new(doc.types.clone());
        for (i, p) in doc.productions.iter().enumerate() {
            let field = format!("productions[{i}]");
            let lhs = p.lhs.to_graph(&format!("{field}.lhs"))?;
            let rhs = p.rhs.to_graph(&format!("{field}.rhs"))?;
            let prod = Production::new(
                &p.name,
                lhs,
                rhs,
                p.interface.iter().copied().collect(),
                p.rhs_order.clone(),
            )
            .map_err(|e| schema(&field, e))?;
            style.add_production(prod).map_err(|e| schema(&field, e))?;
        }
        for (short, name) in &doc.aliases {
            style
                .alias(short, name)
                .map_err(|e| schema(format!("aliases.{short}"), e))?;
        }
        for (i, r) in doc.rules.iter().enumerate() {
            style.define_rule(r).map_err(|e| schema(format!("rules[{i}]"), e))?;
        }
        let invariant = match &doc.invariant {
            Some(text) => Some(parse_formula(text, &style.types).map_err(|e| schema("invariant", e))?),
            None => None,
        };
        let mut ws = Workspace {
            style,
            invariant,
            systems: IndexMap::new(),
        };
        for (i, s) in doc.systems.iter().enumerate() {
            if ws.systems.contains_key(&s.name) {
                return Err(schema(format!("systems[{i}]"), format!("duplicate name `{}`", s.name)));
            }
            let entry = load_system(&ws.style, s, i)?;
            ws.insert_system(&s.name, entry.system, entry.session)?;
        }
        Ok(ws)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let doc: WorkspaceDoc = serde_json::from_str(text).map_err(|e| IoError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_doc(&doc)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn load_system(style: &Style, s: &SystemDoc, i: usize) -> Result<SystemEntry, IoError> {
    let replay_err = |detail: String| IoError::Replay {
        system: s.name.clone(),
        detail,
    };
    let initial = s.initial.to_graph(&format!("systems[{i}].initial"))?;
    let report = initial.validate(&style.types);
    if !report.is_ok() {
        return Err(schema(format!("systems[{i}].initial"), report));
    }
    let system =
        TrackedSystem::replay(initial.clone(), s.id_base, &s.events, style).map_err(|e| replay_err(e.to_string()))?;
    if let Some(snap) = &s.snapshot {
        let got = SnapshotDoc::from(&system);
        if got.graph != snap.graph {
            return Err(replay_err("replayed graph differs from the stored snapshot".into()));
        }
        if got.forest != snap.forest {
            return Err(replay_err("replayed forest differs from the stored snapshot".into()));
        }
    }
    let session = match &s.session {
        None => None,
        Some(d) => {
            let invariant = parse_formula(&d.invariant, &style.types)
                .map_err(|e| schema(format!("systems[{i}].session.invariant"), e))?;
            let log = SessionLog {
                invariant,
                started_at: d.started_at,
                decisions: d.decisions.clone(),
            };
            let (after, session) = log
                .replay(initial, s.id_base, &s.events, style)
                .map_err(|e| replay_err(format!("session: {e}")))?;
            if after != system {
                return Err(replay_err(
                    "the session's decisions do not account for the events after it started".into(),
                ));
            }
            Some(LiveSession {
                started_at: d.started_at,
                session,
            })
        }
    };
    Ok(SystemEntry { system, session })
}
