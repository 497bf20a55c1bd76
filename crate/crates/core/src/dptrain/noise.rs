//! Streaming correlated noise: rows of `C^-1 z` by banded forward
//! substitution, holding only the last `band - 1` outputs.

use rand::Rng;
use rand_distr::StandardNormal;

use super::strategy::StrategyMatrix;
use crate::rng::{keyed_rng, stream};

/// One standard normal draw keyed by `(seed, step, coordinate)`.
pub fn keyed_normal(seed: u64, step: u64, coord: u64) -> f64 {
    keyed_rng(seed, stream::TRAIN_NOISE, step, coord).sample(StandardNormal)
}

/// Emits `scale * (C^-1 z)_i` step by step, where each coordinate of `z_i`
/// is an independent standard normal keyed by `(seed, step, coordinate)`.
/// Solving `C out = z` row by row only ever touches the previous
/// `band - 1` outputs, kept in a ring buffer.
pub struct NoiseStream<'a> {
    strategy: &'a StrategyMatrix,
    dims: usize,
    scale: f64,
    seed: u64,
    step: usize,
    /// Ring of unscaled outputs; slot `i % (band - 1)` holds step `i`.
    history: Vec<Vec<f64>>,
}

impl<'a> NoiseStream<'a> {
    pub fn new(strategy: &'a StrategyMatrix, dims: usize, scale: f64, seed: u64) -> Self {
        let depth = strategy.band().saturating_sub(1);
        Self {
            strategy,
            dims,
            scale,
            seed,
            step: 0,
            history: vec![vec![0.0; dims]; depth],
        }
    }

    /// The next noise vector. Panics past the strategy's step count.
    pub fn next_noise(&mut self) -> Vec<f64> {
        let i = self.step;
        assert!(i < self.strategy.steps(), "noise stream exhausted");
        let band = self.strategy.band();
        let mut out: Vec<f64> = (0..self.dims)
            .map(|c| keyed_normal(self.seed, i as u64, c as u64))
            .collect();
        let lo = i.saturating_sub(band - 1);
        for l in lo..i {
            let coeff = self.strategy.entry(i, l);
            if coeff != 0.0 {
                let prev = &self.history[l % (band - 1)];
                for (o, p) in out.iter_mut().zip(prev) {
                    *o -= coeff * p;
                }
            }
        }
        let diag = self.strategy.entry(i, i);
        for o in out.iter_mut() {
            *o /= diag;
        }
        if band > 1 {
            self.history[i % (band - 1)] = out.clone();
        }
        self.step += 1;
        for o in out.iter_mut() {
            *o *= self.scale;
        }
        out
    }
}
