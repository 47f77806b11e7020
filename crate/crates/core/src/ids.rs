//! Opaque identifiers for graph nodes, graph edges and tracking-forest vertices.
//!
//! All three kinds are drawn from one monotone counter ([`IdGen`]), so an id is
//! unique across kinds within a session. A node and an edge carrying the same
//! number is therefore a duplicate, which `validate_graph` reports.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl $name {
            pub fn raw(self) -> u64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// A node of a hypergraph.
    NodeId,
    "n"
);
id_type!(
    /// A hyperedge.
    EdgeId,
    "e"
);
id_type!(
    /// A vertex of a tracking forest.
    VertexId,
    "v"
);

/// Monotone id source. Ids are never reused: every call returns a number
/// strictly greater than all previously issued ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdGen {
    next: u64,
}

impl IdGen {
    pub fn new() -> Self {
        IdGen { next: 1 }
    }

    /// Starts issuing at `next`.
    pub fn starting_at(next: u64) -> Self {
        IdGen { next: next.max(1) }
    }

    /// The value the next call will return.
    pub fn peek(&self) -> u64 {
        self.next
    }

    /// Makes sure every id issued from now on is above `id`.
    pub fn reserve_above(&mut self, id: u64) {
        if self.next <= id {
            self.next = id + 1;
        }
    }

    fn bump(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn node(&mut self) -> NodeId {
        NodeId(self.bump())
    }

    pub fn edge(&mut self) -> EdgeId {
        EdgeId(self.bump())
    }

    pub fn vertex(&mut self) -> VertexId {
        VertexId(self.bump())
    }

    /// True iff `id` was handed out by this generator.
    pub fn has_issued(&self, id: u64) -> bool {
        id < self.next
    }
}

impl Default for IdGen {
    fn default() -> Self {
        Self::new()
    }
}
