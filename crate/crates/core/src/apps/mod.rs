//! Applications built on the decomposition engine: decremental SCCs,
//! boundary-linked decompositions of undirected graphs, the expander
//! hierarchy and its connectivity queries.

pub mod boundary;
pub mod hierarchy;
pub mod scc;
pub mod undirected;
