//! Fixtures shared by the benchmarks.

use persuade_core::{example_instance, reduce_mis, ExampleId, ExampleParams, Graph, Instance};

/// The example instances with default parameters.
pub fn examples() -> Vec<(&'static str, Instance)> {
    let p = ExampleParams::default();
    [ExampleId::Ex1, ExampleId::Ex2, ExampleId::Ex3, ExampleId::Ex4]
        .into_iter()
        .map(|id| (id.id(), example_instance(id, &p).expect("default parameters are valid")))
        .collect()
}

/// The independent-set gadget for a named graph.
pub fn gadget(name: &str) -> Instance {
    reduce_mis(&Graph::named(name).expect("known graph name"))
}
