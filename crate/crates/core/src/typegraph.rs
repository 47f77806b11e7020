//! The architectural vocabulary: node types, edge types and tentacle signatures.

use crate::graph::Graph;
use crate::ids::{EdgeId, NodeId};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeGraphError {
    #[error("node type `{0}` declared twice")]
    DuplicateNodeType(String),
    #[error("edge type `{0}` declared twice")]
    DuplicateEdgeType(String),
    #[error("edge type `{edge}` uses undeclared node type `{node}`")]
    UndeclaredNodeType { edge: String, node: String },
}

/// A type graph. Edge types double as the sorts of the term algebra induced by
/// a production set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeGraph {
    node_types: Vec<String>,
    edge_types: IndexMap<String, Vec<String>>,
}

impl TypeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_node_type(mut self, name: &str) -> Result<Self, TypeGraphError> {
        self.add_node_type(name)?;
        Ok(self)
    }

    pub fn with_edge_type(mut self, name: &str, signature: &[&str]) -> Result<Self, TypeGraphError> {
        self.add_edge_type(name, signature.iter().map(|s| s.to_string()).collect())?;
        Ok(self)
    }

    pub fn add_node_type(&mut self, name: &str) -> Result<(), TypeGraphError> {
        if self.node_types.iter().any(|n| n == name) {
            return Err(TypeGraphError::DuplicateNodeType(name.to_string()));
        }
        self.node_types.push(name.to_string());
        Ok(())
    }

    pub fn add_edge_type(&mut self, name: &str, signature: Vec<String>) -> Result<(), TypeGraphError> {
        if self.edge_types.contains_key(name) {
            return Err(TypeGraphError::DuplicateEdgeType(name.to_string()));
        }
        if let Some(bad) = signature.iter().find(|n| !self.has_node_type(n)) {
            return Err(TypeGraphError::UndeclaredNodeType {
                edge: name.to_string(),
                node: bad.clone(),
            });
        }
        self.edge_types.insert(name.to_string(), signature);
        Ok(())
    }

    pub fn has_node_type(&self, name: &str) -> bool {
        self.node_types.iter().any(|n| n == name)
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_types(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.edge_types.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn signature(&self, edge_type: &str) -> Option<&[String]> {
        self.edge_types.get(edge_type).map(Vec::as_slice)
    }

    pub fn arity(&self, edge_type: &str) -> Option<usize> {
        self.signature(edge_type).map(<[String]>::len)
    }

    /// Re-checks the declaration invariants; used after deserialization.
    pub fn check(&self) -> Result<(), TypeGraphError> {
        for (i, n) in self.node_types.iter().enumerate() {
            if self.node_types[..i].contains(n) {
                return Err(TypeGraphError::DuplicateNodeType(n.clone()));
            }
        }
        for (name, sig) in &self.edge_types {
            if let Some(bad) = sig.iter().find(|n| !self.has_node_type(n)) {
                return Err(TypeGraphError::UndeclaredNodeType {
                    edge: name.clone(),
                    node: bad.clone(),
                });
            }
        }
        Ok(())
    }

    /// The type graph viewed as an ordinary graph: one node per node type and
    /// one edge per edge type, attached along its signature. Ids are assigned
    /// densely from 1 in declaration order (node types first).
    pub fn as_graph(&self) -> TypeGraphView {
        let mut graph = Graph::new();
        let mut nodes = BTreeMap::new();
        let mut next = 1;
        for ty in &self.node_types {
            let id = NodeId(next);
            next += 1;
            graph.add_named_node(id, ty, ty);
            nodes.insert(ty.clone(), id);
        }
        let mut edges = BTreeMap::new();
        for (ty, sig) in &self.edge_types {
            let id = EdgeId(next);
            next += 1;
            let tentacles = sig.iter().map(|n| nodes[n]).collect();
            graph.add_named_edge(id, ty, tentacles, true, ty);
            edges.insert(ty.clone(), id);
        }
        TypeGraphView { graph, nodes, edges }
    }
}

/// See [`TypeGraph::as_graph`].
#[derive(Clone, Debug)]
pub struct TypeGraphView {
    pub graph: Graph,
    pub nodes: BTreeMap<String, NodeId>,
    pub edges: BTreeMap<String, EdgeId>,
}
