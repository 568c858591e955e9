//! Interactive symbolic regression over a reinforcable lattice of graph
//! structures.
//!
//! A [`LatticeState`] proposes small model graphs, a [`QGraphPool`] fits and
//! ranks them, and the user reinforces the lattice with the graphs they find
//! useful. Fitted graphs can be inspected through [`analysis`] and turned
//! into equations with [`sympify`].

pub mod analysis;
pub mod data;
pub mod error;
pub mod fit;
pub mod graph;
pub mod lattice;
pub mod pool;
pub mod sympify;

pub use data::{Dataset, Sample, SplitSpec, Value};
pub use error::{Error, Result};
pub use fit::{Criterion, FitConfig};
pub use graph::{Graph, InteractionKind, SemanticType, Task};
pub use lattice::{Filter, GraphSpec, LatticeConfig, LatticeState};
pub use pool::{get_qgraph, PoolConfig, QGraphPool};
