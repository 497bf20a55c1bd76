//! Shared fixtures for the criterion benchmarks.

use madp_core::graphgen::{gen_regular, GraphGenSpec};
use madp_core::hypergraph::Hypergraph;

pub fn regular_graph(num_edges: usize, seed: u64) -> Hypergraph {
    gen_regular(&GraphGenSpec {
        num_edges,
        expected_arity: 2.0,
        expected_degree: 2.0,
        skew_alpha: 0.0,
        seed,
    })
    .expect("valid spec")
}
