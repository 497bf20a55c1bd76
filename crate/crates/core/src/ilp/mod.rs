//! Exact formulations of the contribution bounding problem: LP-file export
//! for external solvers and a small-instance branch-and-bound used as an
//! optimality oracle for the greedy algorithms.

mod export;
mod solve;

pub use export::{export_cb_ilp, export_minsep_ilp, render_cb_ilp, render_minsep_ilp};
pub use solve::{exact_solve_cb, independent_set_reduction, ExactResult, SolveLimits};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IlpError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("instance too large: {variables} variables (limit {limit})")]
    TooManyVariables { variables: usize, limit: usize },
    #[error("exact solver limited to {limit} edges, instance has {edges}")]
    TooManyEdges { edges: usize, limit: usize },
    #[error("hypergraph has no edges")]
    EmptyGraph,
}
