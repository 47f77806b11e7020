//! An architectural style: a type graph with its productions and
//! reconfiguration rules, plus small builders for graphs and productions
//! written with named nodes.

use crate::graph::Graph;
use crate::ids::{IdGen, NodeId};
use crate::production::{Production, ProductionError};
use crate::term::{parse_rule, OpSig, ReconfigRule, Signature, TermError};
use crate::typegraph::TypeGraph;
use indexmap::IndexMap;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StyleError {
    #[error("unknown edge type `{0}`")]
    UnknownEdgeType(String),
    #[error("edge `{edge}`: `{ty}` has arity {expected}, {found} nodes given")]
    Arity {
        edge: String,
        ty: String,
        expected: usize,
        found: usize,
    },
    #[error("node `{node}` is used at types `{first}` and `{second}`")]
    NodeType {
        node: String,
        first: String,
        second: String,
    },
    #[error("interface names unknown node `{0}`")]
    UnknownInterfaceNode(String),
    #[error("production `{0}` declared twice")]
    DuplicateProduction(String),
    #[error("rule `{0}` declared twice")]
    DuplicateRule(String),
    #[error("alias `{0}` clashes with an existing name")]
    AliasClash(String),
    #[error(transparent)]
    Production(#[from] ProductionError),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// `(name, type, nodes, theta)`; nodes are referred to by name.
pub type EdgeSpec<'a> = (&'a str, &'a str, &'a [&'a str], bool);

/// Builds a graph with named nodes and edges. Node types come from the
/// edge signatures; nodes get ids in order of first mention.
pub fn build_graph(tg: &TypeGraph, ids: &mut IdGen, edges: &[EdgeSpec]) -> Result<Graph, StyleError> {
    let mut g = Graph::new();
    let mut names: BTreeMap<String, NodeId> = BTreeMap::new();
    for (name, ty, nodes, theta) in edges {
        let sig = tg
            .signature(ty)
            .ok_or_else(|| StyleError::UnknownEdgeType(ty.to_string()))?;
        if sig.len() != nodes.len() {
            return Err(StyleError::Arity {
                edge: name.to_string(),
                ty: ty.to_string(),
                expected: sig.len(),
                found: nodes.len(),
            });
        }
        let mut tentacles = Vec::with_capacity(nodes.len());
        for (n, nty) in nodes.iter().zip(sig) {
            let id = match names.get(*n) {
                Some(id) => {
                    let have = &g.node(*id).unwrap().ty;
                    if have != nty {
                        return Err(StyleError::NodeType {
                            node: n.to_string(),
                            first: have.clone(),
                            second: nty.clone(),
                        });
                    }
                    *id
                }
                None => {
                    let id = g.add_named_node(ids.node(), nty, n);
                    names.insert(n.to_string(), id);
                    id
                }
            };
            tentacles.push(id);
        }
        g.add_named_edge(ids.edge(), ty, tentacles, *theta, name);
    }
    Ok(g)
}

/// Adds isolated named nodes (for graphs where a node is on no edge).
pub fn add_isolated(g: &mut Graph, ids: &mut IdGen, ty: &str, name: &str) -> NodeId {
    g.add_named_node(ids.node(), ty, name)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Style {
    pub types: TypeGraph,
    productions: IndexMap<String, Production>,
    rules: IndexMap<String, ReconfigRule>,
    aliases: BTreeMap<String, String>,
}

impl Style {
    pub fn new(types: TypeGraph) -> Self {
        Style {
            types,
            ..Style::default()
        }
    }

    pub fn add_production(&mut self, p: Production) -> Result<(), StyleError> {
        p.check_types(&self.types)?;
        if self.productions.contains_key(&p.name) || self.aliases.contains_key(&p.name) {
            return Err(StyleError::DuplicateProduction(p.name));
        }
        self.productions.insert(p.name.clone(), p);
        Ok(())
    }

    /// Declares a production with named nodes. The left-hand side is a single
    /// replaceable edge; `interface` pairs left node names with right ones.
    pub fn define(
        &mut self,
        name: &str,
        lhs: (&str, &[&str]),
        rhs: &[EdgeSpec],
        interface: &[(&str, &str)],
    ) -> Result<(), StyleError> {
        let mut ids = IdGen::new();
        let l = build_graph(&self.types, &mut ids, &[("L", lhs.0, lhs.1, true)])?;
        let mut r = build_graph(&self.types, &mut ids, rhs)?;
        let mut i = BTreeMap::new();
        for (ln, rn) in interface {
            let lid = l
                .node_named(ln)
                .ok_or_else(|| StyleError::UnknownInterfaceNode(ln.to_string()))?;
            let rid = match r.node_named(rn) {
                Some(id) => id,
                // an interface node no right-hand edge touches
                None => add_isolated(&mut r, &mut ids, &l.node(lid).unwrap().ty, rn),
            };
            i.insert(lid, rid);
        }
        let p = Production::new(name, l, r, i, vec![])?;
        self.add_production(p)
    }

    pub fn alias(&mut self, short: &str, name: &str) -> Result<(), StyleError> {
        if self.productions.contains_key(short) || !self.productions.contains_key(name) {
            return Err(StyleError::AliasClash(short.to_string()));
        }
        self.aliases.insert(short.to_string(), name.to_string());
        Ok(())
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    /// Looks a production up by name or alias.
    pub fn production(&self, name: &str) -> Option<&Production> {
        let canonical = self.aliases.get(name).map(String::as_str).unwrap_or(name);
        self.productions.get(canonical)
    }

    pub fn productions(&self) -> impl Iterator<Item = &Production> {
        self.productions.values()
    }

    pub fn add_rule(&mut self, rule: ReconfigRule) -> Result<(), StyleError> {
        if self.rules.contains_key(&rule.name) {
            return Err(StyleError::DuplicateRule(rule.name));
        }
        self.rules.insert(rule.name.clone(), rule);
        Ok(())
    }

    /// Parses, validates and adds a rule given in text form.
    pub fn define_rule(&mut self, text: &str) -> Result<(), StyleError> {
        let rule = parse_rule(text, &self.signature())?;
        self.add_rule(rule)
    }

    pub fn rule(&self, name: &str) -> Option<&ReconfigRule> {
        self.rules.get(name)
    }

    pub fn rules(&self) -> impl Iterator<Item = &ReconfigRule> {
        self.rules.values()
    }

    /// The signature induced by the productions.
    pub fn signature(&self) -> Signature {
        Signature {
            sorts: self.types.edge_types().map(|(t, _)| t.to_string()).collect(),
            ops: self
                .productions
                .values()
                .map(|p| {
                    (
                        p.name.clone(),
                        OpSig {
                            args: p.arg_sorts(),
                            result: p.lhs_type().to_string(),
                        },
                    )
                })
                .collect(),
            aliases: self.aliases.clone(),
        }
    }
}
