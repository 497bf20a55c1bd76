//! Retention comparison: size of contribution-bounded datasets on regular
//! vs skewed graphs across (k, expected degree) grids, plus an optional
//! probe for the largest feasible min-separation.

use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, GraphSource};
use super::run::{tie_break, CsvSink};
use super::HarnessError;
use crate::bounding::{greedy_dup, greedy_min_sep};
use crate::graphgen::{gen_regular, gen_skewed, GraphGenSpec};
use crate::hypergraph::Hypergraph;

pub const RETENTION_HEADER: &str =
    "expected_degree,k,regular_total,regular_distinct,skewed_total,skewed_distinct,retention_ratio";
pub const MINSEP_HEADER: &str =
    "expected_degree,regular_max_b,regular_b_times_batch,skewed_max_b,skewed_b_times_batch";

/// Grid for the retention study; lives under `[retention]` in the TOML.
#[derive(Clone, Debug, serde::Deserialize, serde::Serialize)]
pub struct RetentionConfig {
    pub ks: Vec<usize>,
    pub degrees: Vec<f64>,
    /// Probe the largest feasible min-sep at these batch dimensions.
    #[serde(default)]
    pub probe_batches: usize,
    #[serde(default)]
    pub probe_batch_size: usize,
}

pub struct RetentionSummary {
    pub cells: usize,
    pub retention_path: PathBuf,
    pub minsep_path: Option<PathBuf>,
    /// (expected_degree, k, ratio) per cell.
    pub ratios: Vec<(f64, usize, f64)>,
}

fn generate(src: &GraphSource, degree: f64, skewed: bool) -> Result<Hypergraph, HarnessError> {
    let spec = GraphGenSpec {
        num_edges: src.edges,
        expected_arity: src.arity,
        expected_degree: degree,
        skew_alpha: src.alpha,
        seed: src.seed,
    };
    Ok(if skewed {
        gen_skewed(&spec)?
    } else {
        gen_regular(&spec)?
    })
}

/// Largest `b` (starting from 2) for which the greedy scheduler still
/// finds a `T x B` schedule; 1 when even `b = 2` fails.
fn max_feasible_min_sep(
    h: &Hypergraph,
    num_batches: usize,
    batch_size: usize,
    tie: crate::bounding::TieBreak,
) -> usize {
    let mut best = 1;
    let mut b = 2;
    while b <= num_batches {
        if greedy_min_sep(h, num_batches, batch_size, b, tie).is_ok() {
            best = b;
            b += 1;
        } else {
            break;
        }
    }
    best
}

/// For every (degree, k) cell, bounds both graph models with the
/// duplicating greedy pass and reports the skewed/regular retained-size
/// ratio.
pub fn compare_retention(
    cfg: &ExperimentConfig,
    out_dir: impl AsRef<Path>,
) -> Result<RetentionSummary, HarnessError> {
    let retention = cfg
        .retention
        .as_ref()
        .ok_or_else(|| HarnessError::Config("missing [retention] section".into()))?;
    if retention.ks.is_empty() || retention.degrees.is_empty() {
        return Err(HarnessError::Config("retention grids must be nonempty".into()));
    }
    let out_dir = out_dir.as_ref();
    let tie = tie_break(&cfg.bounding);

    let mut sink = CsvSink::create(out_dir.join("retention.csv"), RETENTION_HEADER)?;
    let mut minsep_sink = if retention.probe_batches > 0 {
        Some(CsvSink::create(out_dir.join("minsep.csv"), MINSEP_HEADER)?)
    } else {
        None
    };

    let mut ratios = Vec::new();
    for &degree in &retention.degrees {
        let regular = generate(&cfg.graph, degree, false)?;
        let skewed = generate(&cfg.graph, degree, true)?;
        for &k in &retention.ks {
            let r = greedy_dup(&regular, k, tie);
            let s = greedy_dup(&skewed, k, tie);
            let ratio = s.total_count as f64 / r.total_count as f64;
            sink.push(format!(
                "{},{},{},{},{},{},{}",
                degree, k, r.total_count, r.distinct_count, s.total_count, s.distinct_count, ratio
            ))?;
            ratios.push((degree, k, ratio));
        }
        if let Some(ms) = minsep_sink.as_mut() {
            let t = retention.probe_batches;
            let bsz = retention.probe_batch_size.max(1);
            let rb = max_feasible_min_sep(&regular, t, bsz, tie);
            let sb = max_feasible_min_sep(&skewed, t, bsz, tie);
            ms.push(format!(
                "{},{},{},{},{}",
                degree,
                rb,
                rb * bsz,
                sb,
                sb * bsz
            ))?;
        }
    }

    Ok(RetentionSummary {
        cells: ratios.len(),
        retention_path: sink.path,
        minsep_path: minsep_sink.map(|s| s.path),
        ratios,
    })
}
