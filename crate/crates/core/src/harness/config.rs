//! TOML experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::datagen::CovarianceMode;

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub data: DataConfig,
    pub bounding: BoundingConfig,
    #[serde(default)]
    pub mechanism: MechanismConfig,
    pub privacy: PrivacyConfig,
    pub hyper: HyperGrid,
    pub run: RunConfig,
    /// Grid for the retention study (`experiment retention`).
    pub retention: Option<super::retention::RetentionConfig>,
}

/// Either a path to an edge-list file or generator parameters.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct GraphSource {
    pub path: Option<PathBuf>,
    pub model: Option<GraphModel>,
    #[serde(default)]
    pub edges: usize,
    #[serde(default = "default_two")]
    pub arity: f64,
    #[serde(default = "default_two")]
    pub degree: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_two() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    1.5
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphModel {
    Regular,
    Skewed,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct DataConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_steepness")]
    pub steepness: f64,
    #[serde(default = "default_one")]
    pub beta: f64,
    #[serde(default)]
    pub covariance: CovarianceMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_dim() -> usize {
    100
}

fn default_steepness() -> f64 {
    20.0
}

fn default_one() -> f64 {
    1.0
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            steepness: default_steepness(),
            beta: default_one(),
            covariance: CovarianceMode::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundAlgo {
    Nodup,
    Dup,
    Minsep,
    Interleaved,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieMode {
    #[default]
    Id,
    Shuffle,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    All,
    Low,
    High,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct BoundingConfig {
    pub algo: BoundAlgo,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub tie: TieMode,
    #[serde(default)]
    pub tie_seed: u64,
    /// Fixed min-sep `b`; omitted means sweep from 2 to the last feasible
    /// value.
    pub min_sep: Option<usize>,
    /// Interleaved split threshold `u`.
    #[serde(default = "default_k")]
    pub threshold: usize,
    #[serde(default = "default_one_usize")]
    pub c1: usize,
    #[serde(default = "default_one_usize")]
    pub c2: usize,
    #[serde(default = "default_true")]
    pub allow_dup: bool,
    /// Pool for the random baseline.
    #[serde(default)]
    pub pool: PoolMode,
}

fn default_k() -> usize {
    3
}

fn default_one_usize() -> usize {
    1
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    #[default]
    Dpsgd,
    Dpmf,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
pub struct MechanismConfig {
    #[serde(default)]
    pub kind: MechanismKind,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct PrivacyConfig {
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub noise_table: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct HyperGrid {
    pub learning_rates: Vec<f64>,
    pub clip_norms: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    /// `batch_size * steps` stays fixed at this product across the grid.
    pub step_product: usize,
    /// Accounting-only batch size (the physical one still trains).
    pub hypothetical_batch: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, super::HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| super::HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, super::HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), super::HarnessError> {
        let fail = |msg: String| Err(super::HarnessError::Config(msg));
        if self.graph.path.is_none() && self.graph.model.is_none() {
            return fail("graph needs either a path or a model".into());
        }
        if self.privacy.epsilons.is_empty() {
            return fail("epsilon grid must be nonempty".into());
        }
        if !(self.privacy.delta > 0.0 && self.privacy.delta < 1.0) {
            return fail(format!("delta {} outside (0,1)", self.privacy.delta));
        }
        if self.hyper.batch_sizes.is_empty()
            || self.hyper.learning_rates.is_empty()
            || self.hyper.clip_norms.is_empty()
        {
            return fail("hyperparameter grids must be nonempty".into());
        }
        for &b in &self.hyper.batch_sizes {
            if b == 0 || !self.hyper.step_product.is_multiple_of(b) {
                return fail(format!(
                    "step_product {} not divisible by batch size {b}",
                    self.hyper.step_product
                ));
            }
        }
        if self.run.seeds.is_empty() {
            return fail("need at least one seed".into());
        }
        Ok(())
    }

    /// Stable identifier for reproducing rows: FNV-1a over the canonical
    /// re-serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in text.bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
