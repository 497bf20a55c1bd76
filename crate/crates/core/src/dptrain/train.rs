//! The shared training loop behind DP-SGD and DP-MF.

use rand_distr::{Binomial, Distribution};

use super::noise::{keyed_normal, NoiseStream};
use super::strategy::StrategyMatrix;
use super::{clipped_grad, evaluate, MetricsRow, Model, Optimizer, TrainConfig, TrainOutput, TrainError};
use crate::datagen::{RegressionDataset, Split};
use crate::hypergraph::{EdgeId, Schedule, Selection};
use crate::rng::{keyed_rng, stream};

/// Drops selected copies whose example is not in the train split. The
/// trainers only ever touch train-split examples; accounting must use the
/// size of this restricted multiset for the sampling probability.
pub fn restrict_to_train(selection: &Selection, ds: &RegressionDataset) -> Selection {
    selection
        .iter()
        .filter(|&(e, _)| ds.split(e) == Split::Train)
        .collect()
}

fn train_only_batches(batches: &[Vec<EdgeId>], ds: &RegressionDataset) -> Vec<Vec<EdgeId>> {
    batches
        .iter()
        .map(|b| {
            b.iter()
                .copied()
                .filter(|&e| ds.split(e) == Split::Train)
                .collect()
        })
        .collect()
}

enum BatchSource<'a> {
    /// Poisson sampling over an expanded multiset of example indices: each
    /// copy is an independent Bernoulli(p) trial.
    Poisson { pool: &'a [EdgeId], prob: f64 },
    Fixed(&'a [Vec<EdgeId>]),
}

impl BatchSource<'_> {
    /// Example indices of step `step`, ascending so the gradient reduction
    /// order is deterministic.
    fn draw(&self, seed: u64, step: usize, out: &mut Vec<EdgeId>) {
        out.clear();
        match self {
            BatchSource::Poisson { pool, prob } => {
                if *prob >= 1.0 {
                    out.extend_from_slice(pool);
                    return;
                }
                let mut rng = keyed_rng(seed, stream::TRAIN_BATCH, step as u64, 0);
                let count = Binomial::new(pool.len() as u64, *prob)
                    .expect("valid sampling probability")
                    .sample(&mut rng) as usize;
                let mut picks: Vec<usize> =
                    rand::seq::index::sample(&mut rng, pool.len(), count).into_vec();
                picks.sort_unstable();
                out.extend(picks.into_iter().map(|i| pool[i]));
            }
            BatchSource::Fixed(batches) => out.extend_from_slice(&batches[step]),
        }
    }
}

enum NoiseKind<'a> {
    Independent,
    Correlated(&'a StrategyMatrix),
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
}

fn run_loop(
    ds: &RegressionDataset,
    source: BatchSource<'_>,
    cfg: &TrainConfig,
    noise_kind: NoiseKind<'_>,
) -> Result<TrainOutput, TrainError> {
    if cfg.batch_size == 0 || cfg.steps == 0 {
        return Err(TrainError::InvalidConfig(
            "steps and batch_size must be >= 1".into(),
        ));
    }
    if !(cfg.noise_multiplier >= 0.0) {
        return Err(TrainError::InvalidConfig("noise multiplier must be >= 0".into()));
    }
    let dims = ds.dim() + 1;
    let batch_f = cfg.batch_size as f64;
    // Skipped entirely at sigma = 0; clip_norm may be infinite there.
    let noise_scale = if cfg.noise_multiplier > 0.0 {
        cfg.clip_norm * cfg.noise_multiplier / batch_f
    } else {
        0.0
    };
    let mut noise_stream = match (&noise_kind, cfg.noise_multiplier > 0.0) {
        (NoiseKind::Correlated(strategy), true) => {
            Some(NoiseStream::new(strategy, dims, noise_scale, cfg.seed))
        }
        _ => None,
    };

    let mut model = Model::zeros(ds.dim());
    let mut adam = match cfg.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam { beta1, beta2, eps } => Some(AdamState {
            m: vec![0.0; dims],
            v: vec![0.0; dims],
            beta1,
            beta2,
            eps,
            t: 0,
        }),
    };

    let mut trajectory = Vec::new();
    let mut batch = Vec::new();
    let mut grad_sum = vec![0.0f64; dims];
    for step in 0..cfg.steps {
        source.draw(cfg.seed, step, &mut batch);

        grad_sum.iter_mut().for_each(|g| *g = 0.0);
        let mut norm_total = 0.0;
        for &i in &batch {
            let g = clipped_grad(&model, ds.features(i), ds.label(i), cfg.clip_norm);
            norm_total += g.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (acc, gi) in grad_sum.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        for g in grad_sum.iter_mut() {
            *g /= batch_f;
        }
        let grad_norm_mean = if batch.is_empty() {
            0.0
        } else {
            norm_total / batch.len() as f64
        };

        if cfg.noise_multiplier > 0.0 {
            match (&noise_kind, &mut noise_stream) {
                (NoiseKind::Independent, _) => {
                    for (c, g) in grad_sum.iter_mut().enumerate() {
                        *g += noise_scale * keyed_normal(cfg.seed, step as u64, c as u64);
                    }
                }
                (NoiseKind::Correlated(_), Some(stream)) => {
                    for (g, z) in grad_sum.iter_mut().zip(stream.next_noise()) {
                        *g += z;
                    }
                }
                _ => unreachable!(),
            }
        }

        match adam.as_mut() {
            None => {
                for (c, g) in grad_sum.iter().enumerate() {
                    if c < ds.dim() {
                        model.weights[c] -= cfg.learning_rate * g;
                    } else {
                        model.intercept -= cfg.learning_rate * g;
                    }
                }
            }
            Some(state) => {
                state.t += 1;
                let bc1 = 1.0 - state.beta1.powi(state.t as i32);
                let bc2 = 1.0 - state.beta2.powi(state.t as i32);
                for (c, g) in grad_sum.iter().enumerate() {
                    state.m[c] = state.beta1 * state.m[c] + (1.0 - state.beta1) * g;
                    state.v[c] = state.beta2 * state.v[c] + (1.0 - state.beta2) * g * g;
                    let update = cfg.learning_rate * (state.m[c] / bc1)
                        / ((state.v[c] / bc2).sqrt() + state.eps);
                    if c < ds.dim() {
                        model.weights[c] -= update;
                    } else {
                        model.intercept -= update;
                    }
                }
            }
        }

        let step_1 = step + 1;
        let record = step_1 == cfg.steps
            || (cfg.eval_every > 0 && step_1 % cfg.eval_every == 0);
        if record {
            let (loss, accuracy) = evaluate(&model, ds, Split::Test)
                .unwrap_or((f64::NAN, f64::NAN));
            trajectory.push(MetricsRow {
                step: step_1,
                loss,
                accuracy,
                sigma: cfg.noise_multiplier,
                grad_norm_mean,
            });
        }
    }

    Ok(TrainOutput { model, trajectory })
}

/// DP-SGD over a contribution-bounded selection: Poisson sampling with
/// `p = batch_size / |selection|` over the expanded multiset (duplicate
/// copies are independent trials), clipped mean gradient normalized by the
/// target batch size, independent Gaussian noise per step.
pub fn dpsgd_train(
    ds: &RegressionDataset,
    selection: &Selection,
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    let restricted = restrict_to_train(selection, ds);
    if restricted.is_empty() {
        return Err(TrainError::EmptySelection);
    }
    let pool = restricted.expand();
    let prob = (cfg.batch_size as f64 / pool.len() as f64).min(1.0);
    run_loop(
        ds,
        BatchSource::Poisson { pool: &pool, prob },
        cfg,
        NoiseKind::Independent,
    )
}

/// DP-SGD with externally fixed batches (no sampling), independent noise.
pub fn dpsgd_train_fixed(
    ds: &RegressionDataset,
    batches: &[Vec<EdgeId>],
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    if batches.len() != cfg.steps {
        return Err(TrainError::InvalidConfig(format!(
            "{} fixed batches for {} steps",
            batches.len(),
            cfg.steps
        )));
    }
    let batches = train_only_batches(batches, ds);
    run_loop(ds, BatchSource::Fixed(&batches), cfg, NoiseKind::Independent)
}

/// Banded DP-MF: iterates the schedule's batches in order and correlates
/// the per-step noise through the strategy matrix. With the identity
/// strategy this is exactly DP-SGD on the same fixed batches.
pub fn dpmf_train(
    ds: &RegressionDataset,
    schedule: &Schedule,
    cfg: &TrainConfig,
    strategy: &StrategyMatrix,
) -> Result<TrainOutput, TrainError> {
    if strategy.steps() != schedule.num_batches() {
        return Err(TrainError::ScheduleMismatch {
            strategy_steps: strategy.steps(),
            schedule_batches: schedule.num_batches(),
        });
    }
    if cfg.steps != schedule.num_batches() {
        return Err(TrainError::InvalidConfig(format!(
            "config says {} steps but the schedule has {} batches",
            cfg.steps,
            schedule.num_batches()
        )));
    }
    if cfg.batch_size != schedule.batch_size() {
        return Err(TrainError::InvalidConfig(format!(
            "config batch size {} but the schedule uses {}",
            cfg.batch_size,
            schedule.batch_size()
        )));
    }
    let batches = train_only_batches(schedule.batches(), ds);
    run_loop(
        ds,
        BatchSource::Fixed(&batches),
        cfg,
        NoiseKind::Correlated(strategy),
    )
}
