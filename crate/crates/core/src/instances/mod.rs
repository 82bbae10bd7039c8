//! Built-in example games and mechanisms, the independent-set gadget and
//! random instances for fuzzing.

mod examples;
mod graph;
mod random;

use thiserror::Error;

pub use examples::{example_instance, example_mechanism, ExampleId, ExampleParams, MechanismId};
pub use graph::{max_independent_set, reduce_mis, Graph, MIS_SIZE_CAP};
pub use random::{random_instance, random_mechanism};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("unknown example id '{0}'")]
    UnknownExample(String),
    #[error("bad graph: {0}")]
    Graph(String),
    #[error("graph has {n} vertices; exhaustive search is capped at {cap}")]
    SizeCap { n: usize, cap: usize },
}
