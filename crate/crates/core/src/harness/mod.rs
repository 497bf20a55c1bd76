//! Experiment orchestration: config-driven sweeps with CSV outputs.

mod bias;
mod config;
mod plot;
mod retention;
mod run;

pub use bias::{sweep_bias_tradeoff, sweep_settings, BiasSweepSummary, SweepSetting};
pub use config::*;
pub use plot::{write_line_plot, Series};
pub use retention::{compare_retention, RetentionConfig, RetentionSummary};
pub use run::{run_experiment, RunSummary, RESULTS_HEADER};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("feasibility gate: {0}")]
    GateFailed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] crate::hypergraph::HypergraphError),
    #[error(transparent)]
    GraphGen(#[from] crate::graphgen::GraphGenError),
    #[error(transparent)]
    Data(#[from] crate::datagen::DatagenError),
    #[error(transparent)]
    Train(#[from] crate::dptrain::TrainError),
    #[error(transparent)]
    Accounting(#[from] crate::accounting::AccountingError),
}
