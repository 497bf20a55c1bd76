//! The bias-mitigation sweep: 80 interleaved bounding settings, Pareto
//! filtering on (size, average arity), training only the survivors.

use std::path::{Path, PathBuf};

use super::config::*;
use super::run::{
    materialize_data, materialize_graph, optimizer_of, tie_break, CsvSink, RowScratch,
    RESULTS_HEADER,
};
use super::HarnessError;
use crate::accounting::{calibrate_sigma_dpsgd, PrivacyBudget};
use crate::bounding::{greedy_interleaved, pareto_filter, BoundingResult, InterleaveSpec};
use crate::datagen::Split;
use crate::dptrain::{dpsgd_train, evaluate, restrict_to_train, TrainConfig};
use crate::hypergraph::check_contribution_bound;

pub const SETTINGS_HEADER: &str = "setting,threshold,c1,c2,total,distinct,avg_arity,pareto";
pub const BEST_DEGREE_HEADER: &str =
    "epsilon,setting,threshold,c1,c2,avg_arity,mean_val_accuracy,mean_test_accuracy";

#[derive(Clone, Copy, Debug)]
pub struct SweepSetting {
    pub threshold: usize,
    pub c1: usize,
    pub c2: usize,
}

/// The pinned grid: thresholds {1,2,3,4} crossed with (c1=1, c2 in 1..=10)
/// and (c1 in 1..=10, c2=1); 80 settings, the (1,1) pair appearing in both
/// arms.
pub fn sweep_settings() -> Vec<SweepSetting> {
    let mut out = Vec::with_capacity(80);
    for threshold in 1..=4 {
        for c2 in 1..=10 {
            out.push(SweepSetting { threshold, c1: 1, c2 });
        }
        for c1 in 1..=10 {
            out.push(SweepSetting { threshold, c1, c2: 1 });
        }
    }
    out
}

pub struct BiasSweepSummary {
    pub settings: usize,
    pub survivors: Vec<usize>,
    pub settings_path: PathBuf,
    pub results_path: PathBuf,
    pub best_degree_path: PathBuf,
}

/// Runs all 80 bounding settings, filters to the Pareto frontier of
/// (selected count, average arity), trains only the surviving settings,
/// and reports each epsilon's winner (by seed-averaged validation
/// accuracy) with its average arity.
pub fn sweep_bias_tradeoff(
    cfg: &ExperimentConfig,
    out_dir: impl AsRef<Path>,
) -> Result<BiasSweepSummary, HarnessError> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    let config_hash = cfg.hash();
    let h = materialize_graph(&cfg.graph)?;
    let ds = materialize_data(&h, &cfg.data)?;
    let optimizer = optimizer_of(&cfg.run);
    let tie = tie_break(&cfg.bounding);
    let k = cfg.bounding.k;

    let settings = sweep_settings();
    let mut bounded: Vec<BoundingResult> = Vec::with_capacity(settings.len());
    for s in &settings {
        let spec = InterleaveSpec {
            threshold: s.threshold,
            c1: s.c1,
            c2: s.c2,
            allow_dup: cfg.bounding.allow_dup,
        };
        let r = greedy_interleaved(&h, k, &spec, tie);
        if !check_contribution_bound(&h, &r.output, k) {
            return Err(HarnessError::GateFailed(format!(
                "interleaved setting {s:?} violates bound {k}"
            )));
        }
        bounded.push(r);
    }

    let points: Vec<(f64, f64)> = bounded
        .iter()
        .map(|r| (r.total_count as f64, r.avg_arity))
        .collect();
    let survivors = pareto_filter(&points);

    let mut settings_sink = CsvSink::create(out_dir.join("settings.csv"), SETTINGS_HEADER)?;
    for (i, (s, r)) in settings.iter().zip(&bounded).enumerate() {
        settings_sink.push(format!(
            "{},{},{},{},{},{},{},{}",
            i,
            s.threshold,
            s.c1,
            s.c2,
            r.total_count,
            r.distinct_count,
            r.avg_arity,
            u8::from(survivors.contains(&i)),
        ))?;
    }

    // Train only the non-dominated settings.
    let mut sink = CsvSink::create(out_dir.join("results.csv"), RESULTS_HEADER)?;
    let mut groups: Vec<TrainedGroup> = Vec::new();
    for &idx in &survivors {
        let setting = settings[idx];
        let bound = &bounded[idx];
        let trained_total = restrict_to_train(&bound.output, &ds).total();
        if trained_total == 0 {
            continue;
        }
        let accounting_k = bound.achieved_k.max(1);
        for &batch_size in &cfg.hyper.batch_sizes {
            let steps = cfg.hyper.step_product / batch_size;
            let accounting_batch = cfg.hyper.hypothetical_batch.unwrap_or(batch_size);
            let sampling_prob = (accounting_batch as f64 / trained_total as f64).min(1.0);
            for &epsilon in &cfg.privacy.epsilons {
                let budget = PrivacyBudget::new(epsilon, cfg.privacy.delta)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                let sigma =
                    calibrate_sigma_dpsgd(budget, accounting_k, sampling_prob, steps as u64).ok();
                for &learning_rate in &cfg.hyper.learning_rates {
                    for &clip_norm in &cfg.hyper.clip_norms {
                        let mut vals = Vec::new();
                        let mut tests = Vec::new();
                        for &seed in &cfg.run.seeds {
                            let mut row = RowScratch {
                                status: "ok",
                                mechanism: "dpsgd",
                                algo: format!(
                                    "interleaved-u{}-c{}x{}",
                                    setting.threshold, setting.c1, setting.c2
                                ),
                                epsilon,
                                delta: cfg.privacy.delta,
                                seed,
                                learning_rate,
                                clip_norm,
                                batch_size,
                                steps,
                                min_sep: 0,
                                declared_k: k,
                                achieved_k: bound.achieved_k,
                                selected_total: bound.total_count,
                                selected_distinct: bound.distinct_count,
                                avg_arity: bound.avg_arity,
                                sampling_prob,
                                accounting_batch,
                                accountant: "rdp-subsampled-group-lift",
                                sigma: sigma.unwrap_or(f64::NAN),
                                val_loss: f64::NAN,
                                val_accuracy: f64::NAN,
                                test_loss: f64::NAN,
                                test_accuracy: f64::NAN,
                            };
                            match sigma {
                                None => {
                                    row.status = "infeasible";
                                    row.accountant = "none";
                                }
                                Some(sigma) => {
                                    let tc = TrainConfig {
                                        steps,
                                        batch_size,
                                        clip_norm,
                                        noise_multiplier: sigma,
                                        learning_rate,
                                        optimizer,
                                        seed,
                                        eval_every: cfg.run.eval_every,
                                    };
                                    let trained = dpsgd_train(&ds, &bound.output, &tc)?;
                                    let (vl, va) =
                                        evaluate(&trained.model, &ds, Split::Validation)
                                            .unwrap_or((f64::NAN, f64::NAN));
                                    let (tl, ta) = evaluate(&trained.model, &ds, Split::Test)
                                        .unwrap_or((f64::NAN, f64::NAN));
                                    row.val_loss = vl;
                                    row.val_accuracy = va;
                                    row.test_loss = tl;
                                    row.test_accuracy = ta;
                                    vals.push(va);
                                    tests.push(ta);
                                }
                            }
                            sink.push(row.to_csv(&config_hash))?;
                        }
                        if !vals.is_empty() {
                            groups.push(TrainedGroup {
                                epsilon,
                                setting: idx,
                                avg_arity: bound.avg_arity,
                                val_accs: vals.clone(),
                                test_accs: tests.clone(),
                            });
                        }
                    }
                }
            }
        }
    }

    // Per-epsilon winner by seed-averaged validation accuracy.
    let best_degree_path = out_dir.join("best_degree.csv");
    let mut best_sink = CsvSink::create(best_degree_path.clone(), BEST_DEGREE_HEADER)?;
    for &epsilon in &cfg.privacy.epsilons {
        if let Some((idx, arity, val, test)) = winner_for_epsilon(&groups, epsilon) {
            let s = settings[idx];
            best_sink.push(format!(
                "{},{},{},{},{},{},{},{}",
                epsilon, idx, s.threshold, s.c1, s.c2, arity, val, test
            ))?;
        }
    }

    Ok(BiasSweepSummary {
        settings: settings.len(),
        survivors,
        settings_path: settings_sink.path,
        results_path: sink.path,
        best_degree_path,
    })
}

/// Per-seed accuracies of one trained (epsilon, setting, hyper) cell.
struct TrainedGroup {
    epsilon: f64,
    setting: usize,
    avg_arity: f64,
    val_accs: Vec<f64>,
    test_accs: Vec<f64>,
}

/// Seed-averaged winner among the trained groups for one epsilon.
fn winner_for_epsilon(
    groups: &[TrainedGroup],
    epsilon: f64,
) -> Option<(usize, f64, f64, f64)> {
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    groups
        .iter()
        .filter(|g| g.epsilon == epsilon)
        .map(|g| (g.setting, g.avg_arity, mean(&g.val_accs), mean(&g.test_accs)))
        .max_by(|a, b| a.2.total_cmp(&b.2))
}
