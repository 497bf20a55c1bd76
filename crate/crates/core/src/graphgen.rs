//! Synthetic hypergraph generators.
//!
//! Two models over `|E|` edges and `m = round(|E| * E[|e|] / d_u)` users:
//! a probabilistic regular model (Poisson arity, uniform user choice) and a
//! skewed model where a user's inclusion probability grows with its current
//! degree. All randomness is keyed per `(seed, edge index)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::hypergraph::{Hypergraph, UserId};
use crate::rng::{keyed_rng, stream};

#[derive(Clone, Copy, Debug)]
pub struct GraphGenSpec {
    pub num_edges: usize,
    /// Target expected users per edge, `E[|e|]` (> 0).
    pub expected_arity: f64,
    /// Target expected edges per user, `d_u` (> 0).
    pub expected_degree: f64,
    /// Skew exponent for the preferential model; ignored by the regular one.
    pub skew_alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphGenError {
    #[error("expected_arity must be > 0 (got {0})")]
    InvalidArity(f64),
    #[error("expected_degree must be > 0 (got {0})")]
    InvalidDegree(f64),
    #[error("derived user count is {0}; need at least 1 user (did you pass 0 edges?)")]
    NoUsers(usize),
}

impl GraphGenSpec {
    /// Derived user count `m = round(|E| * E[|e|] / d_u)`.
    pub fn num_users(&self) -> usize {
        (self.num_edges as f64 * self.expected_arity / self.expected_degree).round() as usize
    }

    fn validate(&self) -> Result<usize, GraphGenError> {
        if !(self.expected_arity > 0.0) {
            return Err(GraphGenError::InvalidArity(self.expected_arity));
        }
        if !(self.expected_degree > 0.0) {
            return Err(GraphGenError::InvalidDegree(self.expected_degree));
        }
        let m = self.num_users();
        if m < 1 {
            return Err(GraphGenError::NoUsers(m));
        }
        Ok(m)
    }
}

/// Rate `lambda'` such that a zero-truncated Poisson(`lambda'`) has mean
/// `target`. Edges must have at least one user, so arities are drawn
/// conditioned on being >= 1; keeping the requested mean requires shrinking
/// the rate (the truncated mean of Poisson(t) is `t / (1 - e^-t) > t`).
/// For `target <= 1` no such rate exists and the draw degenerates to
/// constant arity 1.
fn zero_truncated_rate(target: f64) -> f64 {
    if target <= 1.0 + 1e-12 {
        return 0.0;
    }
    let mean = |t: f64| t / (1.0 - (-t).exp());
    let (mut lo, mut hi) = (1e-12, target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sample_arity(rng: &mut impl Rng, rate: f64, max: usize) -> usize {
    if rate <= 0.0 {
        return 1;
    }
    let pois = Poisson::new(rate).expect("positive rate");
    loop {
        let n = pois.sample(rng) as usize;
        if n >= 1 {
            return n.min(max);
        }
    }
}

/// Regular model: per edge, arity ~ zero-truncated Poisson with mean
/// `E[|e|]` (clamped to `m`), then that many distinct users uniformly
/// without replacement. Deterministic given the seed.
pub fn gen_regular(spec: &GraphGenSpec) -> Result<Hypergraph, GraphGenError> {
    let m = spec.validate()?;
    let rate = zero_truncated_rate(spec.expected_arity);
    let mut edges = Vec::with_capacity(spec.num_edges);
    for i in 0..spec.num_edges {
        let mut rng = keyed_rng(spec.seed, stream::GRAPH_EDGE, i as u64, 0);
        let arity = sample_arity(&mut rng, rate, m);
        let mut users: Vec<UserId> = rand::seq::index::sample(&mut rng, m, arity)
            .into_iter()
            .map(|u| UserId(u as u32))
            .collect();
        users.sort_unstable();
        edges.push(users);
    }
    Ok(Hypergraph::new(m, edges).expect("generator upholds edge invariants"))
}

/// Users grouped by current degree. Users sharing a degree share an
/// inclusion probability, so per-edge draws reduce to one pass over the
/// occupied degree values instead of one Bernoulli per user.
struct DegreeBuckets {
    by_degree: BTreeMap<usize, Vec<u32>>,
    /// user -> (degree, index within its bucket)
    pos: Vec<(usize, usize)>,
    weight_sum: f64,
    alpha: f64,
}

impl DegreeBuckets {
    fn new(num_users: usize, alpha: f64) -> Self {
        let mut by_degree = BTreeMap::new();
        by_degree.insert(0, (0..num_users as u32).collect::<Vec<_>>());
        Self {
            by_degree,
            pos: (0..num_users).map(|i| (0, i)).collect(),
            weight_sum: num_users as f64,
            alpha,
        }
    }

    fn weight(&self, degree: usize) -> f64 {
        (1.0 + degree as f64).powf(self.alpha)
    }

    fn promote(&mut self, user: u32) {
        let (d, idx) = self.pos[user as usize];
        let bucket = self.by_degree.get_mut(&d).expect("occupied bucket");
        bucket.swap_remove(idx);
        if let Some(&moved) = bucket.get(idx) {
            self.pos[moved as usize].1 = idx;
        }
        if bucket.is_empty() {
            self.by_degree.remove(&d);
        }
        let next = self.by_degree.entry(d + 1).or_default();
        self.pos[user as usize] = (d + 1, next.len());
        next.push(user);
        self.weight_sum += self.weight(d + 1) - self.weight(d);
    }
}

/// Indices in `0..count` hit by independent Bernoulli(p) trials, generated
/// by geometric gaps so the cost is O(hits + 1) rather than O(count).
fn bernoulli_hits(rng: &mut impl Rng, count: usize, p: f64, out: &mut Vec<usize>) {
    if p <= 0.0 || count == 0 {
        return;
    }
    if p >= 1.0 {
        out.extend(0..count);
        return;
    }
    let ln_q = (1.0 - p).ln();
    let mut i = 0usize;
    loop {
        let u: f64 = rng.random();
        let skip = (u.ln() / ln_q).floor();
        if !skip.is_finite() || skip >= (count - i) as f64 {
            return;
        }
        i += skip as usize;
        out.push(i);
        i += 1;
        if i >= count {
            return;
        }
    }
}

/// Skewed model: edges are built sequentially; for edge `i`, user `j` is
/// included independently with probability
/// `E[|e|] * (1 + d(j))^alpha / sum_j' (1 + d(j'))^alpha` (capped at 1),
/// where degrees come from edges before `i`. Empty draws redraw the whole
/// edge. Deterministic given the seed.
pub fn gen_skewed(spec: &GraphGenSpec) -> Result<Hypergraph, GraphGenError> {
    let m = spec.validate()?;
    let mut buckets = DegreeBuckets::new(m, spec.skew_alpha);
    let mut edges = Vec::with_capacity(spec.num_edges);
    let mut hits = Vec::new();
    for i in 0..spec.num_edges {
        let mut rng = keyed_rng(spec.seed, stream::GRAPH_EDGE, i as u64, 0);
        let mut users: Vec<UserId> = Vec::new();
        while users.is_empty() {
            for (&degree, bucket) in &buckets.by_degree {
                let p =
                    (spec.expected_arity * buckets.weight(degree) / buckets.weight_sum).min(1.0);
                hits.clear();
                bernoulli_hits(&mut rng, bucket.len(), p, &mut hits);
                users.extend(hits.iter().map(|&idx| UserId(bucket[idx])));
            }
        }
        users.sort_unstable();
        for &u in &users {
            buckets.promote(u.0);
        }
        edges.push(users);
    }
    Ok(Hypergraph::new(m, edges).expect("generator upholds edge invariants"))
}

/// Exact histogram `degree -> number of users with that degree`, including
/// isolated users at degree 0. Counts sum to `num_users`.
pub fn degree_histogram(h: &Hypergraph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for &d in h.degrees() {
        *hist.entry(d).or_insert(0usize) += 1;
    }
    hist
}
