//! Differentially private model training for datasets whose examples are
//! attributed to multiple users.
//!
//! The pipeline: model the attribution structure as a hypergraph
//! ([`hypergraph`]), select a contribution-bounded subset or batch schedule
//! ([`bounding`], with exact baselines in [`ilp`]), calibrate the noise the
//! selection permits ([`accounting`]), and train a logistic-regression model
//! with DP-SGD or banded DP-MF ([`dptrain`]). Synthetic graphs and
//! regression data come from [`graphgen`] and [`datagen`]; [`harness`]
//! orchestrates config-driven experiment sweeps.

pub mod accounting;
pub mod bounding;
pub mod datagen;
pub mod dptrain;
pub mod graphgen;
pub mod harness;
pub mod hypergraph;
pub mod ilp;
pub mod rng;

pub use hypergraph::{
    check_contribution_bound, check_min_sep, EdgeId, Hyperedge, Hypergraph, HypergraphError,
    Schedule, Selection, UserId,
};

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::hypergraph::{Hypergraph, UserId};

    /// The toy email hypergraph: users {A,B,C,D} -> {0,1,2,3}, edges
    /// e1={A,B}, e2={A,B,C}, e3={B,D}, e4={C,B}, e5={D,C}.
    pub fn fig1() -> Hypergraph {
        let e = |ids: &[u32]| ids.iter().map(|&u| UserId(u)).collect::<Vec<_>>();
        Hypergraph::new(
            4,
            vec![
                e(&[0, 1]),
                e(&[0, 1, 2]),
                e(&[1, 3]),
                e(&[2, 1]),
                e(&[3, 2]),
            ],
        )
        .unwrap()
    }
}
