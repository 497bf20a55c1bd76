//! Config-driven experiment sweeps: bound, calibrate, train, evaluate, one
//! CSV row per run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::*;
use super::HarnessError;
use crate::accounting::{
    calibrate_sigma_dpsgd, calibrate_sigma_gaussian, load_external_noise_table, NoiseTable,
    PrivacyBudget,
};
use crate::bounding::{
    self, baseline_pool, greedy_dup, greedy_interleaved, greedy_min_sep, greedy_no_dup,
    random_baseline, BoundingResult, InterleaveSpec, ScheduleResult, TieBreak,
};
use crate::datagen::{gen_regression, RegressionDataset, RegressionSpec, Split};
use crate::dptrain::{
    dpmf_train, dpsgd_train, evaluate, restrict_to_train, Optimizer, StrategyMatrix, TrainConfig,
};
use crate::graphgen::{gen_regular, gen_skewed, GraphGenSpec};
use crate::hypergraph::{
    check_contribution_bound, check_min_sep, load_hypergraph, Hypergraph,
};

/// Pinned results header; every run appends exactly these columns.
pub const RESULTS_HEADER: &str = "status,config_hash,timestamp,mechanism,algo,epsilon,delta,\
seed,learning_rate,clip_norm,batch_size,steps,min_sep,declared_k,achieved_k,selected_total,\
selected_distinct,avg_arity,sampling_prob,accounting_batch,accountant,sigma,val_loss,\
val_accuracy,test_loss,test_accuracy";

pub struct RunSummary {
    pub rows: usize,
    pub ok_rows: usize,
    pub results_path: PathBuf,
    pub best_path: PathBuf,
}

pub(crate) fn tie_break(cfg: &BoundingConfig) -> TieBreak {
    match cfg.tie {
        TieMode::Id => TieBreak::IdAscending,
        TieMode::Shuffle => TieBreak::SeededShuffle(cfg.tie_seed),
    }
}

pub(crate) fn materialize_graph(src: &GraphSource) -> Result<Hypergraph, HarnessError> {
    if let Some(path) = &src.path {
        return Ok(load_hypergraph(path)?);
    }
    let spec = GraphGenSpec {
        num_edges: src.edges,
        expected_arity: src.arity,
        expected_degree: src.degree,
        skew_alpha: src.alpha,
        seed: src.seed,
    };
    let h = match src.model.expect("validated: model or path present") {
        GraphModel::Regular => gen_regular(&spec)?,
        GraphModel::Skewed => gen_skewed(&spec)?,
    };
    Ok(h)
}

pub(crate) fn materialize_data(
    h: &Hypergraph,
    data: &DataConfig,
) -> Result<RegressionDataset, HarnessError> {
    Ok(gen_regression(
        h,
        &RegressionSpec {
            dim: data.dim,
            steepness: data.steepness,
            bias_scale: data.beta,
            covariance: data.covariance,
            seed: data.seed,
        },
    )?)
}

/// Selection-producing algorithms (everything except minsep). For the
/// random baseline the reference greedy-dup run fixes both the sample size
/// and the contribution bound used for accounting, mirroring its role as a
/// bias ablation trained with the greedy run's noise.
pub(crate) fn bound_selection(
    h: &Hypergraph,
    cfg: &BoundingConfig,
    seed: u64,
) -> Result<(BoundingResult, usize), HarnessError> {
    let tie = tie_break(cfg);
    let (result, accounting_k) = match cfg.algo {
        BoundAlgo::Nodup => {
            let r = greedy_no_dup(h, cfg.k, tie);
            let k = r.achieved_k.max(1);
            (r, k)
        }
        BoundAlgo::Dup => {
            let r = greedy_dup(h, cfg.k, tie);
            let k = r.achieved_k.max(1);
            (r, k)
        }
        BoundAlgo::Interleaved => {
            let spec = InterleaveSpec {
                threshold: cfg.threshold,
                c1: cfg.c1,
                c2: cfg.c2,
                allow_dup: cfg.allow_dup,
            };
            let r = greedy_interleaved(h, cfg.k, &spec, tie);
            let k = r.achieved_k.max(1);
            (r, k)
        }
        BoundAlgo::Random => {
            let reference = greedy_dup(h, cfg.k, tie);
            let pool = match cfg.pool {
                PoolMode::All => bounding::BaselinePool::All,
                PoolMode::Low => bounding::BaselinePool::Low,
                PoolMode::High => bounding::BaselinePool::High,
            };
            let pool_size = baseline_pool(h, pool).len();
            let target = reference.total_count.min(pool_size);
            let sel = random_baseline(h, target, pool, seed)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            // Trained with the reference run's noise even though the
            // bound may not hold; that difference is the ablation.
            (bounding::summarize_selection(h, sel), reference.achieved_k.max(1))
        }
        BoundAlgo::Minsep => {
            return Err(HarnessError::Config(
                "minsep bounding needs the dpmf path".into(),
            ))
        }
    };
    if !matches!(cfg.algo, BoundAlgo::Random) && !check_contribution_bound(h, &result.output, cfg.k)
    {
        return Err(HarnessError::GateFailed(format!(
            "{:?} selection violates its contribution bound {}",
            cfg.algo, cfg.k
        )));
    }
    Ok((result, accounting_k))
}

/// Feasible min-sep schedules for one (T, B) cell: the configured `b`, or
/// a sweep from 2 up to the last feasible value when none is pinned.
pub(crate) fn minsep_schedules(
    h: &Hypergraph,
    cfg: &BoundingConfig,
    num_batches: usize,
    batch_size: usize,
) -> Vec<(usize, ScheduleResult)> {
    let tie = tie_break(cfg);
    let mut out = Vec::new();
    match cfg.min_sep {
        Some(b) => {
            if let Ok(r) = greedy_min_sep(h, num_batches, batch_size, b, tie) {
                out.push((b, r));
            }
        }
        None => {
            let mut b = 2;
            while b <= num_batches {
                match greedy_min_sep(h, num_batches, batch_size, b, tie) {
                    Ok(r) => out.push((b, r)),
                    Err(_) => break,
                }
                b += 1;
            }
        }
    }
    for (b, r) in &out {
        assert!(
            check_min_sep(h, &r.output, *b),
            "schedule violates min-sep {b}"
        );
    }
    out
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub(crate) struct RowScratch {
    pub status: &'static str,
    pub mechanism: &'static str,
    pub algo: String,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub min_sep: usize,
    pub declared_k: usize,
    pub achieved_k: usize,
    pub selected_total: usize,
    pub selected_distinct: usize,
    pub avg_arity: f64,
    pub sampling_prob: f64,
    pub accounting_batch: usize,
    pub accountant: &'static str,
    pub sigma: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

impl RowScratch {
    pub(crate) fn to_csv(&self, config_hash: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.status,
            config_hash,
            timestamp(),
            self.mechanism,
            self.algo,
            self.epsilon,
            self.delta,
            self.seed,
            self.learning_rate,
            self.clip_norm,
            self.batch_size,
            self.steps,
            self.min_sep,
            self.declared_k,
            self.achieved_k,
            self.selected_total,
            self.selected_distinct,
            self.avg_arity,
            self.sampling_prob,
            self.accounting_batch,
            self.accountant,
            self.sigma,
            self.val_loss,
            self.val_accuracy,
            self.test_loss,
            self.test_accuracy,
        )
    }
}

pub(crate) struct CsvSink {
    file: fs::File,
    pub path: PathBuf,
    pub rows: Vec<String>,
}

impl CsvSink {
    pub(crate) fn create(path: PathBuf, header: &str) -> Result<Self, HarnessError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = fs::File::create(&path)?;
        writeln!(file, "{header}")?;
        Ok(Self {
            file,
            path,
            rows: Vec::new(),
        })
    }

    /// Appends and flushes so partial sweeps leave usable output.
    pub(crate) fn push(&mut self, row: String) -> Result<(), HarnessError> {
        writeln!(self.file, "{row}")?;
        self.file.flush()?;
        self.rows.push(row);
        Ok(())
    }
}

pub(crate) fn load_table(cfg: &PrivacyConfig) -> Result<Option<NoiseTable>, HarnessError> {
    Ok(match &cfg.noise_table {
        Some(path) => Some(load_external_noise_table(path)?),
        None => None,
    })
}

pub(crate) fn optimizer_of(run: &RunConfig) -> Optimizer {
    match run.optimizer {
        OptimizerKind::Sgd => Optimizer::Sgd,
        OptimizerKind::Adam => Optimizer::adam_default(),
    }
}

/// One full sweep: for every (hyperparameter point, epsilon, seed) bound,
/// calibrate, train, evaluate, and append a row. Per-epsilon winners by
/// validation accuracy (ties to the smaller sigma) land in `best.csv`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: impl AsRef<Path>,
) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    let config_hash = cfg.hash();
    let h = materialize_graph(&cfg.graph)?;
    let ds = materialize_data(&h, &cfg.data)?;
    let table = load_table(&cfg.privacy)?;
    let optimizer = optimizer_of(&cfg.run);

    let mut sink = CsvSink::create(out_dir.join("results.csv"), RESULTS_HEADER)?;
    let mut best: Vec<(f64, RowScratch)> = Vec::new();
    let mut ok_rows = 0usize;

    let is_dpmf = matches!(cfg.mechanism.kind, MechanismKind::Dpmf);
    // Selection algorithms bound once; minsep bounds per batch-size cell.
    let selection_bound = if is_dpmf {
        None
    } else {
        Some(bound_selection(&h, &cfg.bounding, cfg.graph.seed)?)
    };

    for &batch_size in &cfg.hyper.batch_sizes {
        let steps = cfg.hyper.step_product / batch_size;
        let accounting_batch = cfg.hyper.hypothetical_batch.unwrap_or(batch_size);

        // (min_sep, schedule or selection) cells for this batch size.
        let cells: Vec<(usize, Option<ScheduleResult>)> = if is_dpmf {
            let scheds = minsep_schedules(&h, &cfg.bounding, steps, batch_size);
            scheds.into_iter().map(|(b, r)| (b, Some(r))).collect()
        } else {
            vec![(0usize, None)]
        };

        if cells.is_empty() {
            // No feasible schedule at any b: record one diagnostic row per
            // epsilon so the sweep's shape stays visible.
            for &epsilon in &cfg.privacy.epsilons {
                let row = RowScratch {
                    status: "no_schedule",
                    mechanism: "dpmf",
                    algo: format!("{:?}", cfg.bounding.algo).to_lowercase(),
                    epsilon,
                    delta: cfg.privacy.delta,
                    seed: 0,
                    learning_rate: 0.0,
                    clip_norm: 0.0,
                    batch_size,
                    steps,
                    min_sep: cfg.bounding.min_sep.unwrap_or(0),
                    declared_k: cfg.bounding.k,
                    achieved_k: 0,
                    selected_total: 0,
                    selected_distinct: 0,
                    avg_arity: 0.0,
                    sampling_prob: 0.0,
                    accounting_batch,
                    accountant: "none",
                    sigma: f64::NAN,
                    val_loss: f64::NAN,
                    val_accuracy: f64::NAN,
                    test_loss: f64::NAN,
                    test_accuracy: f64::NAN,
                };
                sink.push(row.to_csv(&config_hash))?;
            }
            continue;
        }

        for (min_sep, schedule) in &cells {
            // Stats and accounting inputs for this cell.
            let (total, distinct, avg_arity, achieved_k, accounting_k) = match schedule {
                Some(sr) => (
                    sr.total_count,
                    sr.distinct_count,
                    sr.avg_arity,
                    sr.achieved_k,
                    sr.achieved_k.max(1),
                ),
                None => {
                    let (br, acct_k) = selection_bound.as_ref().expect("dpsgd path");
                    (
                        br.total_count,
                        br.distinct_count,
                        br.avg_arity,
                        br.achieved_k,
                        *acct_k,
                    )
                }
            };
            let trained_total = match schedule {
                Some(_) => total,
                None => {
                    let (br, _) = selection_bound.as_ref().expect("dpsgd path");
                    restrict_to_train(&br.output, &ds).total()
                }
            };
            let sampling_prob = if is_dpmf || trained_total == 0 {
                0.0
            } else {
                (accounting_batch as f64 / trained_total as f64).min(1.0)
            };

            for &epsilon in &cfg.privacy.epsilons {
                let budget = PrivacyBudget::new(epsilon, cfg.privacy.delta)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                let table_hit = table.as_ref().and_then(|t| {
                    t.lookup(
                        epsilon,
                        cfg.privacy.delta,
                        accounting_k,
                        sampling_prob,
                        steps as u64,
                    )
                });
                let (sigma, accountant): (Option<f64>, &'static str) = match table_hit {
                    Some(s) => (Some(s), "external-table"),
                    None if is_dpmf => (
                        calibrate_sigma_gaussian(budget, (accounting_k as f64).sqrt()).ok(),
                        "analytic-gaussian-minsep",
                    ),
                    None => (
                        calibrate_sigma_dpsgd(budget, accounting_k, sampling_prob, steps as u64)
                            .ok(),
                        "rdp-subsampled-group-lift",
                    ),
                };

                for &learning_rate in &cfg.hyper.learning_rates {
                    for &clip_norm in &cfg.hyper.clip_norms {
                        for &seed in &cfg.run.seeds {
                            let mut row = RowScratch {
                                status: "ok",
                                mechanism: if is_dpmf { "dpmf" } else { "dpsgd" },
                                algo: format!("{:?}", cfg.bounding.algo).to_lowercase(),
                                epsilon,
                                delta: cfg.privacy.delta,
                                seed,
                                learning_rate,
                                clip_norm,
                                batch_size,
                                steps,
                                min_sep: *min_sep,
                                declared_k: cfg.bounding.k,
                                achieved_k,
                                selected_total: total,
                                selected_distinct: distinct,
                                avg_arity,
                                sampling_prob,
                                accounting_batch,
                                accountant,
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
                                    let trained = match schedule {
                                        Some(sr) => {
                                            let strategy =
                                                StrategyMatrix::optimized(steps, *min_sep);
                                            dpmf_train(&ds, &sr.output, &tc, &strategy)?
                                        }
                                        None => {
                                            let (br, _) =
                                                selection_bound.as_ref().expect("dpsgd path");
                                            dpsgd_train(&ds, &br.output, &tc)?
                                        }
                                    };
                                    let (vl, va) =
                                        evaluate(&trained.model, &ds, Split::Validation)
                                            .unwrap_or((f64::NAN, f64::NAN));
                                    let (tl, ta) = evaluate(&trained.model, &ds, Split::Test)
                                        .unwrap_or((f64::NAN, f64::NAN));
                                    row.val_loss = vl;
                                    row.val_accuracy = va;
                                    row.test_loss = tl;
                                    row.test_accuracy = ta;
                                    ok_rows += 1;
                                }
                            }
                            let keep = row.status == "ok";
                            let csv = row.to_csv(&config_hash);
                            sink.push(csv)?;
                            if keep {
                                best_insert(&mut best, row);
                            }
                        }
                    }
                }
            }
        }
    }

    let best_path = out_dir.join("best.csv");
    let mut best_sink = CsvSink::create(best_path.clone(), RESULTS_HEADER)?;
    best.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, row) in &best {
        best_sink.push(row.to_csv(&config_hash))?;
    }

    // Convenience epsilon curve of the per-epsilon winners.
    let curve: Vec<(f64, f64)> = best
        .iter()
        .filter(|(_, r)| r.test_accuracy.is_finite())
        .map(|(eps, r)| (eps.log2(), r.test_accuracy))
        .collect();
    if curve.len() >= 2 {
        let _ = super::plot::write_line_plot(
            out_dir.join("accuracy_vs_epsilon.svg"),
            "best test accuracy per epsilon",
            "log2(epsilon)",
            "test accuracy",
            &[super::plot::Series {
                label: "best".into(),
                points: curve,
            }],
        );
    }

    Ok(RunSummary {
        rows: sink.rows.len(),
        ok_rows,
        results_path: sink.path,
        best_path,
    })
}

/// Keeps the best row per epsilon by validation accuracy; ties prefer the
/// smaller sigma.
fn best_insert(best: &mut Vec<(f64, RowScratch)>, row: RowScratch) {
    if let Some(slot) = best.iter_mut().find(|(eps, _)| *eps == row.epsilon) {
        let incumbent = &slot.1;
        let better = row.val_accuracy > incumbent.val_accuracy
            || (row.val_accuracy == incumbent.val_accuracy && row.sigma < incumbent.sigma);
        if better {
            slot.1 = row;
        }
    } else {
        best.push((row.epsilon, row));
    }
}
