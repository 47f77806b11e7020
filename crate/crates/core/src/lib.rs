//! Typed hypergraphs for architectural styles: productions, a first-order
//! edge logic, weakest preconditions, derivation tracking, term-rewriting
//! reconfiguration, parsing and invariant recovery.

pub mod bounded;
pub mod fixtures;
pub mod graph;
pub mod ids;
pub mod io;
pub mod iso;
pub mod logic;
pub mod production;
pub mod reconfig;
pub mod recovery;
pub mod style;
pub mod term;
pub mod tracking;
pub mod typegraph;
pub mod wp;

pub use graph::{Edge, Graph, Node};
pub use ids::{EdgeId, IdGen, NodeId, VertexId};
pub use io::{Workspace, WorkspaceDoc};
pub use iso::{find_isomorphism, isomorphic};
pub use logic::{parse_formula, satisfies, Assignment, Formula, Var};
pub use production::{apply_production, find_matches, Production};
pub use reconfig::apply_reconfiguration;
pub use recovery::{Decision, RecoverySession, SessionLog, SessionState};
pub use style::Style;
pub use term::{ReconfigRule, Term};
pub use tracking::{Event, Forest, TrackedSystem};
pub use typegraph::TypeGraph;
pub use wp::weakest_precondition;
