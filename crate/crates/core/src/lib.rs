//! Dynamic expander decompositions of directed and undirected multigraphs.
//!
//! The engine maintains a partition of the vertex set into expander clusters
//! while the graph undergoes edge deletions, vertex splits and self-loop
//! insertions. Expansion is certified through embedded witness graphs which
//! are repaired locally with a bounded blocking flow; clusters that cannot be
//! repaired are split along sparse cuts. On top of the core engine sit three
//! applications (decremental SCCs, boundary-linked decompositions with an
//! expander hierarchy, and dynamic connectivity) plus a brute-force oracle
//! suite used by the verification layers.

pub mod apps;
pub mod cutmatch;
pub mod decomp;
pub mod flow;
pub mod graph;
pub mod oracle;
pub mod prune;
pub mod ratio;
pub mod vecmap;
pub mod witness;

use thiserror::Error;

/// Errors surfaced by the core engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex {0}")]
    UnknownVertex(u32),
    #[error("unknown or retired edge {0}")]
    UnknownEdge(u32),
    #[error("edge {0} is not incident to vertex {1}")]
    NotIncident(u32, u32),
    #[error("vertex split degree condition violated at vertex {0}")]
    DegreeCondition(u32),
    #[error("size gate exceeded: {0}")]
    SizeGate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("postcondition violated: {0}")]
    Postcondition(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("termination guard tripped: {0}")]
    Guard(String),
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("vertex set mismatch: {0}")]
    VertexSetMismatch(String),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
