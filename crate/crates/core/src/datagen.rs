//! Synthetic logistic-regression data attached to hyperedges.
//!
//! Each edge gets a Gaussian feature vector and a Bernoulli label whose
//! probability is a steep sigmoid of the inner product with an
//! arity-dependent ground-truth vector: the effective parameters for an
//! edge of arity `n` are `(2 / (1 + beta)) * (base + beta * n * bias)`, so
//! examples attributed to more users carry systematically different signal
//! and the bias knob `beta` controls how strongly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::hypergraph::Hypergraph;
use crate::rng::{keyed_rng, stream};

const MAGIC: &[u8; 4] = b"MADP";
const VERSION: u32 = 1;

/// Coordinate variance of every Gaussian draw (ground truth and features).
///
/// The generating covariance is stated as `(1/sqrt(d)) I`, which gives
/// coordinate variance `1/sqrt(d)`; the variant with coordinate variance
/// `1/d` instead normalizes the expected squared norm to 1.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    /// Coordinate variance `1/sqrt(d)`.
    #[default]
    Sqrt,
    /// Coordinate variance `1/d` (unit expected squared norm).
    Inv,
}

impl CovarianceMode {
    pub fn coordinate_variance(self, dim: usize) -> f64 {
        match self {
            CovarianceMode::Sqrt => 1.0 / (dim as f64).sqrt(),
            CovarianceMode::Inv => 1.0 / dim as f64,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RegressionSpec {
    pub dim: usize,
    /// Sigmoid steepness `s`.
    pub steepness: f64,
    /// Bias amplification `beta`.
    pub bias_scale: f64,
    pub covariance: CovarianceMode,
    pub seed: u64,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            dim: 100,
            steepness: 20.0,
            bias_scale: 1.0,
            covariance: CovarianceMode::Sqrt,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("feature dimension must be >= 1")]
    InvalidDim,
    #[error("steepness must be > 0")]
    InvalidSteepness,
    #[error("bias_scale must be > 0")]
    InvalidBiasScale,
    #[error("hypergraph has no edges")]
    EmptyGraph,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[repr(u8)]
pub enum Split {
    Train = 0,
    Test = 1,
    Validation = 2,
}

impl Split {
    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Test),
            2 => Some(Split::Validation),
            _ => None,
        }
    }
}

/// Generating parameters: the arity-independent base vector and the
/// per-arity bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub base: Vec<f64>,
    pub bias: Vec<f64>,
    pub steepness: f64,
    pub bias_scale: f64,
}

impl GroundTruth {
    /// `(2 / (1 + beta)) * (base + beta * arity * bias)`.
    pub fn effective_vector(&self, arity: usize) -> Vec<f64> {
        let scale = 2.0 / (1.0 + self.bias_scale);
        self.base
            .iter()
            .zip(&self.bias)
            .map(|(a, b)| scale * (a + self.bias_scale * arity as f64 * b))
            .collect()
    }

    /// Generating label probability for a feature vector of an edge with
    /// the given arity.
    pub fn label_probability(&self, features: &[f32], arity: usize) -> f64 {
        let w = self.effective_vector(arity);
        let z: f64 = w.iter().zip(features).map(|(wi, &f)| wi * f as f64).sum();
        sigmoid(self.steepness * z)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Features, labels, and split tags, one row per edge of the source graph.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDataset {
    dim: usize,
    features: Vec<f32>,
    labels: Vec<u8>,
    arity: Vec<u32>,
    splits: Vec<Split>,
    /// Present for generated data; lost on file round-trips.
    pub ground_truth: Option<GroundTruth>,
}

impl RegressionDataset {
    /// Assembles a dataset from raw parts (for externally produced data).
    /// `features` is row-major with `dim` entries per example.
    pub fn from_parts(
        dim: usize,
        features: Vec<f32>,
        labels: Vec<u8>,
        arity: Vec<u32>,
        splits: Vec<Split>,
    ) -> Result<Self, DatagenError> {
        if dim < 1 {
            return Err(DatagenError::InvalidDim);
        }
        let n = labels.len();
        if features.len() != n * dim || arity.len() != n || splits.len() != n {
            return Err(DatagenError::Format(format!(
                "inconsistent part lengths for {n} examples of dim {dim}"
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(DatagenError::Format("labels must be 0 or 1".into()));
        }
        Ok(Self {
            dim,
            features,
            labels,
            arity,
            splits,
            ground_truth: None,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn features(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    #[inline]
    pub fn arity(&self, i: usize) -> u32 {
        self.arity[i]
    }

    #[inline]
    pub fn split(&self, i: usize) -> Split {
        self.splits[i]
    }

    pub fn indices_in(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let mut sizes = (0, 0, 0);
        for s in &self.splits {
            match s {
                Split::Train => sizes.0 += 1,
                Split::Test => sizes.1 += 1,
                Split::Validation => sizes.2 += 1,
            }
        }
        sizes
    }
}

fn gaussian_vector(rng: &mut impl Rng, dim: usize, sd: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * sd
        })
        .collect()
}

/// 80/10/10 split tags: test and validation take `floor(n/10)` each, the
/// remainder trains. Uniformly random partition, deterministic given seed.
fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut keyed_rng(seed, stream::DATA_SPLIT, 0, 0));
    let tenth = n / 10;
    let mut tags = vec![Split::Train; n];
    for &i in &perm[..tenth] {
        tags[i] = Split::Test;
    }
    for &i in &perm[tenth..2 * tenth] {
        tags[i] = Split::Validation;
    }
    tags
}

/// Draws features and a label for every edge of `h`. Per-edge draws are
/// keyed by `(seed, edge id)`; the split is drawn from the same seed.
pub fn gen_regression(
    h: &Hypergraph,
    spec: &RegressionSpec,
) -> Result<RegressionDataset, DatagenError> {
    if spec.dim < 1 {
        return Err(DatagenError::InvalidDim);
    }
    if !(spec.steepness > 0.0) {
        return Err(DatagenError::InvalidSteepness);
    }
    if !(spec.bias_scale > 0.0) {
        return Err(DatagenError::InvalidBiasScale);
    }
    if h.is_empty() {
        return Err(DatagenError::EmptyGraph);
    }
    let sd = spec.covariance.coordinate_variance(spec.dim).sqrt();
    let truth = GroundTruth {
        base: gaussian_vector(
            &mut keyed_rng(spec.seed, stream::DATA_TRUTH, 0, 0),
            spec.dim,
            sd,
        ),
        bias: gaussian_vector(
            &mut keyed_rng(spec.seed, stream::DATA_TRUTH, 1, 0),
            spec.dim,
            sd,
        ),
        steepness: spec.steepness,
        bias_scale: spec.bias_scale,
    };

    let n = h.num_edges();
    let mut features = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    let mut arity = Vec::with_capacity(n);
    for edge in h.edges() {
        let mut frng = keyed_rng(spec.seed, stream::DATA_FEATURE, edge.id as u64, 0);
        let f: Vec<f32> = (0..spec.dim)
            .map(|_| {
                let z: f64 = frng.sample(StandardNormal);
                (z * sd) as f32
            })
            .collect();
        let p = truth.label_probability(&f, edge.arity());
        let u: f64 = keyed_rng(spec.seed, stream::DATA_LABEL, edge.id as u64, 0).random();
        labels.push(u8::from(u < p));
        arity.push(edge.arity() as u32);
        features.extend_from_slice(&f);
    }

    Ok(RegressionDataset {
        dim: spec.dim,
        features,
        labels,
        arity,
        splits: assign_splits(n, spec.seed),
        ground_truth: Some(truth),
    })
}

/// Re-draws the train/test/validation partition with a fresh seed.
pub fn split_dataset(ds: &mut RegressionDataset, seed: u64) {
    ds.splits = assign_splits(ds.len(), seed);
}

/// Accuracy of the generating model itself (threshold 0.5) on one split.
pub fn ground_truth_accuracy(ds: &RegressionDataset, split: Split) -> Option<f64> {
    let truth = ds.ground_truth.as_ref()?;
    let idx = ds.indices_in(split);
    if idx.is_empty() {
        return None;
    }
    let correct = idx
        .iter()
        .filter(|&&i| {
            let p = truth.label_probability(ds.features(i), ds.arity(i) as usize);
            u8::from(p >= 0.5) == ds.label(i)
        })
        .count();
    Some(correct as f64 / idx.len() as f64)
}

/// Binary layout: `MADP`, version u32, dim u32, num_edges u64, then per
/// edge `dim * f32` features, u8 label, u32 arity, u8 split tag. All
/// little-endian.
pub fn save_dataset(ds: &RegressionDataset, path: impl AsRef<Path>) -> Result<(), DatagenError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(ds.dim as u32).to_le_bytes())?;
    w.write_all(&(ds.len() as u64).to_le_bytes())?;
    for i in 0..ds.len() {
        for &f in ds.features(i) {
            w.write_all(&f.to_le_bytes())?;
        }
        w.write_all(&[ds.labels[i]])?;
        w.write_all(&ds.arity[i].to_le_bytes())?;
        w.write_all(&[ds.splits[i] as u8])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<RegressionDataset, DatagenError> {
    let mut r = std::io::BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DatagenError::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(DatagenError::Format(format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut r)? as usize;
    if dim < 1 {
        return Err(DatagenError::Format("dimension must be >= 1".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut arity = Vec::with_capacity(n);
    let mut splits = Vec::with_capacity(n);
    let mut f4 = [0u8; 4];
    for i in 0..n {
        for _ in 0..dim {
            r.read_exact(&mut f4)?;
            features.push(f32::from_le_bytes(f4));
        }
        let mut b = [0u8; 1];
        r.read_exact(&mut b)?;
        if b[0] > 1 {
            return Err(DatagenError::Format(format!(
                "edge {i}: label {} not in {{0,1}}",
                b[0]
            )));
        }
        labels.push(b[0]);
        arity.push(read_u32(&mut r)?);
        r.read_exact(&mut b)?;
        let split = Split::from_tag(b[0])
            .ok_or_else(|| DatagenError::Format(format!("edge {i}: bad split tag {}", b[0])))?;
        splits.push(split);
    }
    Ok(RegressionDataset {
        dim,
        features,
        labels,
        arity,
        splits,
        ground_truth: None,
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32, DatagenError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, DatagenError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig1;
    use crate::graphgen::{gen_regular, GraphGenSpec};

    fn small_spec(seed: u64) -> RegressionSpec {
        RegressionSpec {
            dim: 8,
            seed,
            ..RegressionSpec::default()
        }
    }

    #[test]
    fn beta_one_effective_vector_is_exact_sum() {
        let truth = GroundTruth {
            base: vec![0.5, -1.0],
            bias: vec![0.25, 2.0],
            steepness: 20.0,
            bias_scale: 1.0,
        };
        // 2/(1+1) = 1, so the scale drops out.
        assert_eq!(
            truth.effective_vector(3),
            vec![0.5 + 3.0 * 0.25, -1.0 + 3.0 * 2.0]
        );
    }

    #[test]
    fn orthogonal_feature_gives_half_probability() {
        let truth = GroundTruth {
            base: vec![1.0, 0.0],
            bias: vec![0.0, 0.0],
            steepness: 20.0,
            bias_scale: 1.0,
        };
        let p = truth.label_probability(&[0.0, 3.5], 2);
        assert_eq!(p, 0.5);
    }

    fn count_tags(tags: &[Split]) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for t in tags {
            match t {
                Split::Train => c.0 += 1,
                Split::Test => c.1 += 1,
                Split::Validation => c.2 += 1,
            }
        }
        c
    }

    #[test]
    fn split_proportions() {
        assert_eq!(count_tags(&assign_splits(10, 3)), (8, 1, 1));
        assert_eq!(count_tags(&assign_splits(0, 3)), (0, 0, 0));
        assert_eq!(
            count_tags(&assign_splits(125_000, 3)),
            (100_000, 12_500, 12_500)
        );
    }

    #[test]
    fn coordinate_variance_matches_mode() {
        let dim = 16;
        let sd = CovarianceMode::Sqrt.coordinate_variance(dim).sqrt();
        let mut sum_sq = 0.0;
        let draws = 10_000u64;
        for i in 0..draws {
            let v = gaussian_vector(&mut keyed_rng(1, stream::DATA_TRUTH, i, 1), dim, sd);
            sum_sq += v.iter().map(|x| x * x).sum::<f64>();
        }
        let var = sum_sq / (draws * dim as u64) as f64;
        let target = 0.25; // 1/sqrt(16)
        // 3 standard errors of the mean of chi-square coordinates.
        let se = (2.0 * target * target / (draws as f64 * dim as f64)).sqrt();
        assert!(
            (var - target).abs() <= 3.0 * se,
            "coordinate variance {var}, want {target} +- {}",
            3.0 * se
        );
    }

    #[test]
    fn label_law_matches_sigmoid() {
        let truth = GroundTruth {
            base: vec![0.3, -0.2],
            bias: vec![0.1, 0.05],
            steepness: 20.0,
            bias_scale: 1.0,
        };
        let f = [0.08f32, 0.03];
        let p = truth.label_probability(&f, 2);
        let n = 100_000u64;
        let mut hits = 0u64;
        for i in 0..n {
            let u: f64 = keyed_rng(5, stream::DATA_LABEL, i, 0).random();
            hits += u64::from(u < p);
        }
        let rate = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (rate - p).abs() <= 3.0 * se,
            "rate {rate}, want {p} +- {}",
            3.0 * se
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let h = fig1();
        let a = gen_regression(&h, &small_spec(7)).unwrap();
        let b = gen_regression(&h, &small_spec(7)).unwrap();
        assert_eq!(a, b);
        let c = gen_regression(&h, &small_spec(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn errors_on_bad_input() {
        let h = fig1();
        assert!(matches!(
            gen_regression(
                &h,
                &RegressionSpec {
                    dim: 0,
                    ..small_spec(0)
                }
            ),
            Err(DatagenError::InvalidDim)
        ));
        let empty = Hypergraph::new(3, vec![]).unwrap();
        assert!(matches!(
            gen_regression(&empty, &small_spec(0)),
            Err(DatagenError::EmptyGraph)
        ));
    }

    #[test]
    fn file_round_trip() {
        let h = gen_regular(&GraphGenSpec {
            num_edges: 64,
            expected_arity: 2.0,
            expected_degree: 2.0,
            skew_alpha: 0.0,
            seed: 3,
        })
        .unwrap();
        let ds = gen_regression(&h, &small_spec(11)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.madp");
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert!(back.ground_truth.is_none());
        let mut stripped = ds.clone();
        stripped.ground_truth = None;
        assert_eq!(back, stripped);
    }

    #[test]
    fn resplit_changes_tags_not_data() {
        let h = fig1();
        let mut ds = gen_regression(&h, &small_spec(2)).unwrap();
        let before = ds.features.clone();
        split_dataset(&mut ds, 99);
        assert_eq!(ds.features, before);
        assert_eq!(ds.len(), 5);
    }
}
