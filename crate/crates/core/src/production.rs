//! Design productions `L -> R` and asserted productions, with matching and
//! application by replacement of a single replaceable edge.

use crate::graph::{Edge, Graph, GraphMorphism};
use crate::ids::{EdgeId, IdGen, NodeId};
use crate::logic::{satisfies, Assignment, Formula, LogicError, Var};
use crate::typegraph::TypeGraph;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductionError {
    #[error("production `{name}`: left-hand side must have exactly one edge, found {found}")]
    LhsEdgeCount { name: String, found: usize },
    #[error("production `{0}`: left-hand side edge must be replaceable")]
    LhsNotReplaceable(String),
    #[error("production `{0}`: left-hand side edge attaches a node twice")]
    LhsRepeatedNode(String),
    #[error("production `{0}`: left-hand side has a node not attached to its edge")]
    LhsStrayNode(String),
    #[error("production `{name}`: interface map is not defined on {node}")]
    InterfaceNotTotal { name: String, node: NodeId },
    #[error("production `{0}`: interface map is not injective")]
    InterfaceNotInjective(String),
    #[error(
        "production `{name}`: interface sends {from} to {to}, which is not a right-hand side node of the same type"
    )]
    InterfaceTarget { name: String, from: NodeId, to: NodeId },
    #[error("production `{0}`: rhs_order is not a permutation of the right-hand side edges")]
    BadRhsOrder(String),
    #[error("production `{name}`: {detail}")]
    IllTyped { name: String, detail: String },
    #[error("no edge {0} in the graph")]
    NoSuchEdge(EdgeId),
    #[error("edge {0} is not replaceable")]
    NotReplaceable(EdgeId),
    #[error("edge {edge} has type `{found}`, production expects `{expected}`")]
    TypeMismatch {
        edge: EdgeId,
        expected: String,
        found: String,
    },
    #[error("precondition: {0}")]
    Logic(#[from] LogicError),
}

/// A design production. `interface` maps every node of `lhs` into `rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Production {
    pub name: String,
    pub lhs: Graph,
    pub rhs: Graph,
    pub interface: BTreeMap<NodeId, NodeId>,
    pub rhs_order: Vec<EdgeId>,
}

impl Production {
    /// Checks the well-formedness conditions and builds the production.
    /// An empty `rhs_order` defaults to the insertion order of `rhs`.
    pub fn new(
        name: &str,
        lhs: Graph,
        rhs: Graph,
        interface: BTreeMap<NodeId, NodeId>,
        rhs_order: Vec<EdgeId>,
    ) -> Result<Self, ProductionError> {
        let rhs_order = if rhs_order.is_empty() {
            rhs.edge_ids().collect()
        } else {
            rhs_order
        };
        let p = Production {
            name: name.to_string(),
            lhs,
            rhs,
            interface,
            rhs_order,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<(), ProductionError> {
        let name = self.name.clone();
        if self.lhs.edge_count() != 1 {
            return Err(ProductionError::LhsEdgeCount {
                name,
                found: self.lhs.edge_count(),
            });
        }
        let (le, ledge) = self.lhs.edges().next().unwrap();
        if !self.lhs.theta(le) {
            return Err(ProductionError::LhsNotReplaceable(name));
        }
        let distinct: BTreeSet<_> = ledge.tentacles.iter().collect();
        if distinct.len() != ledge.tentacles.len() {
            return Err(ProductionError::LhsRepeatedNode(name));
        }
        if self.lhs.node_count() != distinct.len() || self.lhs.node_ids().any(|n| !distinct.contains(&n)) {
            return Err(ProductionError::LhsStrayNode(name));
        }
        for l in self.lhs.node_ids() {
            let Some(r) = self.interface.get(&l) else {
                return Err(ProductionError::InterfaceNotTotal { name, node: l });
            };
            let same_type = self.rhs.node(*r).map(|n| &n.ty) == self.lhs.node(l).map(|n| &n.ty);
            if !same_type {
                return Err(ProductionError::InterfaceTarget { name, from: l, to: *r });
            }
        }
        if self.interface.keys().any(|k| !self.lhs.has_node(*k)) {
            return Err(ProductionError::InterfaceNotTotal {
                name,
                node: *self.interface.keys().find(|k| !self.lhs.has_node(**k)).unwrap(),
            });
        }
        let images: BTreeSet<_> = self.interface.values().collect();
        if images.len() != self.interface.len() {
            return Err(ProductionError::InterfaceNotInjective(name));
        }
        let order: BTreeSet<_> = self.rhs_order.iter().collect();
        let edges: BTreeSet<_> = self.rhs.edge_ids().collect();
        if order.len() != self.rhs_order.len() || order.into_iter().copied().collect::<BTreeSet<_>>() != edges {
            return Err(ProductionError::BadRhsOrder(name));
        }
        Ok(())
    }

    /// Validates both sides against a type graph.
    pub fn check_types(&self, tg: &TypeGraph) -> Result<(), ProductionError> {
        for (side, g) in [("left", &self.lhs), ("right", &self.rhs)] {
            let report = g.validate(tg);
            if !report.is_ok() {
                return Err(ProductionError::IllTyped {
                    name: self.name.clone(),
                    detail: format!("{side}-hand side: {report}"),
                });
            }
        }
        Ok(())
    }

    pub fn lhs_edge(&self) -> (EdgeId, &Edge) {
        self.lhs.edges().next().expect("checked on construction")
    }

    pub fn lhs_type(&self) -> &str {
        &self.lhs_edge().1.ty
    }

    /// The operation typing `E_1 x .. x E_n -> L`.
    pub fn arg_sorts(&self) -> Vec<String> {
        self.rhs_order
            .iter()
            .map(|e| self.rhs.edge(*e).unwrap().ty.clone())
            .collect()
    }

    pub fn arity(&self) -> usize {
        self.rhs_order.len()
    }

    /// `R[j]`, 0-based.
    pub fn rhs_edge(&self, j: usize) -> Option<(EdgeId, &Edge)> {
        let id = *self.rhs_order.get(j)?;
        Some((id, self.rhs.edge(id)?))
    }

    /// Right-hand side nodes outside the image of the interface map.
    pub fn internal_nodes(&self) -> BTreeSet<NodeId> {
        let image: BTreeSet<_> = self.interface.values().copied().collect();
        self.rhs.node_ids().filter(|n| !image.contains(n)).collect()
    }

    /// `i(l_k)` for the k-th tentacle of the left-hand side edge.
    pub fn interface_along_lhs(&self) -> Vec<NodeId> {
        self.lhs_edge().1.tentacles.iter().map(|l| self.interface[l]).collect()
    }
}

/// An occurrence of a production's left-hand side: the target edge and the
/// alignment of `L`'s nodes with its tentacles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    pub edge: EdgeId,
    pub nodes: BTreeMap<NodeId, NodeId>,
}

/// Builds the match of `p` at `edge`, checking type and replaceability.
pub fn match_at(g: &Graph, p: &Production, edge: EdgeId) -> Result<Match, ProductionError> {
    let e = g.edge(edge).ok_or(ProductionError::NoSuchEdge(edge))?;
    let (_, le) = p.lhs_edge();
    if e.ty != le.ty || e.tentacles.len() != le.tentacles.len() {
        return Err(ProductionError::TypeMismatch {
            edge,
            expected: le.ty.clone(),
            found: e.ty.clone(),
        });
    }
    if !g.theta(edge) {
        return Err(ProductionError::NotReplaceable(edge));
    }
    Ok(Match {
        edge,
        nodes: le.tentacles.iter().copied().zip(e.tentacles.iter().copied()).collect(),
    })
}

/// One match per replaceable edge of `L`'s type, in edge order.
pub fn find_matches(g: &Graph, p: &Production) -> Vec<Match> {
    let ty = p.lhs_type();
    g.edges_of_type(ty)
        .filter_map(|(id, _)| match_at(g, p, id).ok())
        .collect()
}

/// Result of replacing one edge.
#[derive(Clone, Debug)]
pub struct Application {
    pub graph: Graph,
    /// `R -> G'`.
    pub copy: GraphMorphism,
    /// The created edges, in `rhs_order`.
    pub created: Vec<EdgeId>,
}

/// Replaces the matched edge by a fresh copy of `R`, glued along the
/// interface. Created edges are appended in `rhs_order`.
pub fn apply_production(g: &Graph, p: &Production, m: &Match, ids: &mut IdGen) -> Result<Application, ProductionError> {
    let fresh = match_at(g, p, m.edge)?;
    if fresh.nodes != m.nodes {
        return Err(ProductionError::TypeMismatch {
            edge: m.edge,
            expected: p.lhs_type().to_string(),
            found: "a different alignment".into(),
        });
    }
    let mut out = g.without_edges(&[m.edge]);
    let mut copy = GraphMorphism::default();
    let glued: BTreeMap<NodeId, NodeId> = p.interface.iter().map(|(l, r)| (*r, m.nodes[l])).collect();
    for (r, node) in p.rhs.nodes() {
        let target = match glued.get(&r) {
            Some(n) => *n,
            None => {
                let n = ids.node();
                out.add_node(n, &node.ty);
                n
            }
        };
        copy.nodes.insert(r, target);
    }
    let mut created = Vec::with_capacity(p.rhs_order.len());
    for re in &p.rhs_order {
        let edge = p.rhs.edge(*re).unwrap();
        let id = ids.edge();
        let tentacles = edge.tentacles.iter().map(|n| copy.nodes[n]).collect();
        out.add_edge(id, &edge.ty, tentacles, p.rhs.theta(*re));
        copy.edges.insert(*re, id);
        created.push(id);
    }
    Ok(Application {
        graph: out,
        copy,
        created,
    })
}

/// `<pre, pre_h> p <post, post_h>`; `pre_h` ranges over `L`'s nodes and
/// `post_h` over `R`'s.
#[derive(Clone, Debug)]
pub struct AssertedProduction {
    pub production: Production,
    pub pre: Formula,
    pub pre_h: BTreeMap<Var, NodeId>,
    pub post: Formula,
    pub post_h: BTreeMap<Var, NodeId>,
}

impl AssertedProduction {
    /// `<top> p <top>`.
    pub fn plain(p: Production) -> Self {
        AssertedProduction {
            production: p,
            pre: Formula::Top,
            pre_h: BTreeMap::new(),
            post: Formula::Top,
            post_h: BTreeMap::new(),
        }
    }

    /// The precondition's assignment under `m`, extended by `env` for
    /// variables `pre_h` does not cover.
    pub fn pre_assignment(&self, m: &Match, env: &Assignment) -> Assignment {
        let mut h = env.clone();
        for (v, l) in &self.pre_h {
            if let Some(n) = m.nodes.get(l) {
                h.set(v.clone(), *n);
            }
        }
        h
    }

    /// The postcondition's assignment after an application.
    pub fn post_assignment(&self, app: &Application, env: &Assignment) -> Assignment {
        let mut h = env.clone();
        for (v, r) in &self.post_h {
            if let Some(n) = app.copy.node(*r) {
                h.set(v.clone(), n);
            }
        }
        h
    }
}

/// Why an asserted application was refused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreconditionViolation {
    pub assignment: Assignment,
    /// Instantiations of the outermost universal quantifier at which the
    /// precondition fails.
    pub failing: Vec<(EdgeId, Assignment)>,
}

#[derive(Clone, Debug)]
pub enum AssertedOutcome {
    Applied(Application),
    Violated(PreconditionViolation),
}

pub fn apply_asserted(
    g: &Graph,
    pi: &AssertedProduction,
    m: &Match,
    env: &Assignment,
    ids: &mut IdGen,
) -> Result<AssertedOutcome, ProductionError> {
    match_at(g, &pi.production, m.edge)?;
    let h = pi.pre_assignment(m, env);
    if satisfies(g, &pi.pre, &h)? {
        return apply_production(g, &pi.production, m, ids).map(AssertedOutcome::Applied);
    }
    let failing = crate::logic::failing_instances(g, &pi.pre, &h)?;
    Ok(AssertedOutcome::Violated(PreconditionViolation {
        assignment: h,
        failing,
    }))
}
