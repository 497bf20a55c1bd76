//! Privacy accounting and noise calibration.
//!
//! Two calibration pipelines feed the trainers:
//!
//! * min-separation schedules reduce to a plain Gaussian mechanism with
//!   sensitivity `sqrt(k)`, handled by the analytic-Gaussian calibrator;
//! * Poisson-sampled selections go through subsampled-Gaussian RDP,
//!   conversion to `(eps, delta)`, and a generic group-privacy lift for the
//!   contribution bound `k`. This route is sound but looser than dedicated
//!   group-level accountants, so an external noise table can override it.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, AccountingError> {
        if !(epsilon >= 0.0) {
            return Err(AccountingError::InvalidEpsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AccountingError::InvalidDelta(delta));
        }
        Ok(Self { epsilon, delta })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AccountingError {
    #[error("epsilon must be >= 0 (got {0})")]
    InvalidEpsilon(f64),
    #[error("delta must be in (0, 1) (got {0})")]
    InvalidDelta(f64),
    #[error("sampling probability must be in (0, 1] (got {0})")]
    InvalidSamplingProb(f64),
    #[error("sensitivity must be > 0 (got {0})")]
    InvalidSensitivity(f64),
    #[error("no noise multiplier <= {max_sigma} satisfies the budget")]
    Infeasible { max_sigma: f64 },
    #[error("noise table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for AccountingError {
    fn from(e: std::io::Error) -> Self {
        AccountingError::Io(e.to_string())
    }
}

/// RDP orders covering both low- and high-epsilon regimes.
pub fn default_orders() -> Vec<f64> {
    let mut orders = vec![1.25, 1.5];
    orders.extend((2..=64).map(f64::from));
    orders.push(128.0);
    orders.push(256.0);
    orders
}

/// Standard normal CDF via the complementary error function; accurate in
/// both tails well past 1e-12 absolute error.
fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln(Phi(x))` with an asymptotic fallback once `erfc` underflows
/// (`x < -37.5` or so): `Phi(x) ~ phi(x) / |x|` for large negative `x`.
fn ln_std_normal_cdf(x: f64) -> f64 {
    let phi = std_normal_cdf(x);
    if phi > 0.0 {
        phi.ln()
    } else {
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Exact `delta(eps)` of the Gaussian mechanism with sensitivity 1 and
/// noise multiplier `sigma`:
/// `Phi(1/(2 sigma) - eps sigma) - e^eps * Phi(-1/(2 sigma) - eps sigma)`.
pub fn analytic_gaussian_delta(epsilon: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0 && epsilon >= 0.0);
    let a = std_normal_cdf(1.0 / (2.0 * sigma) - epsilon * sigma);
    // e^eps * Phi(x) computed in log space to dodge overflow at large eps.
    let b = (epsilon + ln_std_normal_cdf(-1.0 / (2.0 * sigma) - epsilon * sigma)).exp();
    (a - b).clamp(0.0, 1.0)
}

/// Inverse of [`analytic_gaussian_delta`] in epsilon (bisection; delta is
/// strictly decreasing in epsilon).
pub fn analytic_gaussian_epsilon(sigma: f64, delta: f64) -> f64 {
    assert!(sigma > 0.0 && delta > 0.0 && delta < 1.0);
    if analytic_gaussian_delta(0.0, sigma) <= delta {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while analytic_gaussian_delta(hi, sigma) > delta {
        hi *= 2.0;
        if hi > 1e6 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if analytic_gaussian_delta(mid, sigma) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest noise multiplier (relative tolerance 1e-6) whose Gaussian
/// mechanism at the given sensitivity meets the budget. A min-separation
/// schedule with post-hoc bound `k` and a unit-column-norm strategy has
/// sensitivity `sqrt(k)`.
pub fn calibrate_sigma_gaussian(
    budget: PrivacyBudget,
    sensitivity: f64,
) -> Result<f64, AccountingError> {
    if !(sensitivity > 0.0) {
        return Err(AccountingError::InvalidSensitivity(sensitivity));
    }
    // delta(eps, sigma/sens) decreases in sigma; bracket then bisect.
    let meets = |sigma: f64| analytic_gaussian_delta(budget.epsilon, sigma / sensitivity)
        <= budget.delta;
    let mut hi = sensitivity;
    while !meets(hi) {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(AccountingError::Infeasible { max_sigma: 1e9 });
        }
    }
    let mut lo = hi / 2.0;
    while lo > 1e-12 && meets(lo) {
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) / hi < 1e-7 {
            break;
        }
    }
    Ok(hi)
}

/// Log-moment `(alpha - 1) * RDP(alpha)` of one step of the
/// Poisson-subsampled Gaussian at integer order `alpha >= 2`:
/// `ln( sum_j C(alpha, j) (1-p)^(alpha-j) p^j e^{j(j-1)/(2 sigma^2)} )`,
/// evaluated stably in log space.
fn sgm_log_moment_int(alpha: u64, p: f64, sigma: f64) -> f64 {
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln(); // -inf at p = 1 handled by the j < alpha terms vanishing
    let mut terms = Vec::with_capacity(alpha as usize + 1);
    let mut ln_binom = 0.0f64; // ln C(alpha, 0)
    for j in 0..=alpha {
        if j > 0 {
            ln_binom += ((alpha - j + 1) as f64).ln() - (j as f64).ln();
        }
        let jf = j as f64;
        let ln_term = if p >= 1.0 {
            if j == alpha {
                jf * (jf - 1.0) / (2.0 * sigma * sigma)
            } else {
                f64::NEG_INFINITY
            }
        } else {
            ln_binom + (alpha - j) as f64 * ln_q + jf * ln_p
                + jf * (jf - 1.0) / (2.0 * sigma * sigma)
        };
        terms.push(ln_term);
    }
    log_sum_exp(&terms)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Per-order RDP of `steps` compositions of the Poisson-subsampled
/// Gaussian. Integer orders use the closed-form binomial expansion;
/// fractional orders interpolate the log-moment linearly between the
/// neighboring integers (the log-moment is convex in the order, so this
/// overestimates and stays sound). `p = 1` reduces to the unsubsampled
/// Gaussian curve `steps * alpha / (2 sigma^2)`.
pub fn rdp_subsampled_gaussian(
    sigma: f64,
    p: f64,
    steps: u64,
    orders: &[f64],
) -> Result<Vec<(f64, f64)>, AccountingError> {
    assert!(sigma > 0.0);
    if !(p > 0.0 && p <= 1.0) {
        return Err(AccountingError::InvalidSamplingProb(p));
    }
    let log_moment = |alpha: f64| -> f64 {
        if (alpha.fract()).abs() < 1e-12 && alpha >= 2.0 {
            sgm_log_moment_int(alpha as u64, p, sigma)
        } else {
            let lo = alpha.floor().max(1.0);
            let hi = lo + 1.0;
            let m_lo = if lo < 2.0 {
                0.0 // order 1: the log-moment vanishes
            } else {
                sgm_log_moment_int(lo as u64, p, sigma)
            };
            let m_hi = sgm_log_moment_int(hi as u64, p, sigma);
            let w = alpha - lo;
            (1.0 - w) * m_lo + w * m_hi
        }
    };
    Ok(orders
        .iter()
        .map(|&alpha| {
            assert!(alpha > 1.0, "RDP orders must exceed 1");
            let eps = steps as f64 * log_moment(alpha) / (alpha - 1.0);
            (alpha, eps)
        })
        .collect())
}

/// Converts an RDP curve to `(eps, delta)`-DP:
/// `min_alpha eps_rdp(alpha) + ln(1/(alpha delta))/(alpha - 1) + ln(1 - 1/alpha)`,
/// clamped at 0. Returns the epsilon and the minimizing order.
pub fn rdp_to_dp(curve: &[(f64, f64)], delta: f64) -> (f64, f64) {
    assert!(!curve.is_empty(), "empty RDP curve");
    assert!(delta > 0.0 && delta < 1.0);
    let mut best = (f64::INFINITY, curve[0].0);
    for &(alpha, eps_rdp) in curve {
        let eps =
            eps_rdp + (1.0 / (alpha * delta)).ln() / (alpha - 1.0) + (1.0 - 1.0 / alpha).ln();
        if eps < best.0 {
            best = (eps, alpha);
        }
    }
    (best.0.max(0.0), best.1)
}

/// Group privacy for contribution bound `k`: an example-level
/// `(eps, delta)` guarantee lifts to `(k eps, k e^{(k-1) eps} delta)` for
/// any set of at most `k` examples.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct GroupBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Set when the exponent overflowed and delta saturated at 1.
    pub saturated: bool,
}

pub fn group_lift(epsilon_ex: f64, delta_ex: f64, k: usize) -> GroupBudget {
    assert!(k >= 1);
    let kf = k as f64;
    let exponent = (kf - 1.0) * epsilon_ex;
    if exponent > 700.0 {
        return GroupBudget {
            epsilon: kf * epsilon_ex,
            delta: 1.0,
            saturated: true,
        };
    }
    let delta = kf * exponent.exp() * delta_ex;
    GroupBudget {
        epsilon: kf * epsilon_ex,
        delta: delta.min(1.0),
        saturated: delta >= 1.0,
    }
}

/// DP-SGD calibration through the loose-but-sound pipeline: find the
/// smallest sigma whose example-level subsampled-Gaussian guarantee at
/// `(eps/k, delta * e^{-(k-1) eps / k} / k)` group-lifts to within the
/// requested budget. Monotone in sigma, solved by bisection to relative
/// tolerance 1e-4. Fails when even sigma = 1e4 cannot meet the budget.
pub fn calibrate_sigma_dpsgd(
    budget: PrivacyBudget,
    k: usize,
    p: f64,
    steps: u64,
) -> Result<f64, AccountingError> {
    assert!(k >= 1);
    if !(p > 0.0 && p <= 1.0) {
        return Err(AccountingError::InvalidSamplingProb(p));
    }
    let orders = default_orders();
    let kf = k as f64;
    // Target example-level guarantee: eps/k and delta shrunk so the lift
    // lands inside the budget.
    let delta_target = budget.delta * (-(kf - 1.0) * budget.epsilon / kf).exp() / kf;

    let meets = |sigma: f64| -> Result<bool, AccountingError> {
        let curve = rdp_subsampled_gaussian(sigma, p, steps, &orders)?;
        let (eps_ex, _) = rdp_to_dp(&curve, delta_target);
        let lifted = group_lift(eps_ex, delta_target, k);
        Ok(lifted.epsilon <= budget.epsilon && lifted.delta <= budget.delta && !lifted.saturated)
    };

    const MAX_SIGMA: f64 = 1e4;
    if !meets(MAX_SIGMA)? {
        return Err(AccountingError::Infeasible { max_sigma: MAX_SIGMA });
    }
    let mut lo = 1e-4;
    let mut hi = MAX_SIGMA;
    if meets(lo)? {
        return Ok(lo);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo) / hi < 1e-5 {
            break;
        }
    }
    Ok(hi)
}

/// Exact-match noise table: `(eps, delta, k, p, steps) -> sigma` loaded
/// from a CSV with header `epsilon,delta,k,p,steps,sigma`. The escape
/// hatch for sigmas produced by tighter external accountants.
#[derive(Clone, Debug, Default)]
pub struct NoiseTable {
    rows: HashMap<NoiseKey, f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
struct NoiseKey {
    eps_bits: u64,
    delta_bits: u64,
    k: usize,
    p_bits: u64,
    steps: u64,
}

impl NoiseKey {
    fn new(epsilon: f64, delta: f64, k: usize, p: f64, steps: u64) -> Self {
        Self {
            eps_bits: epsilon.to_bits(),
            delta_bits: delta.to_bits(),
            k,
            p_bits: p.to_bits(),
            steps,
        }
    }
}

impl NoiseTable {
    pub fn lookup(&self, epsilon: f64, delta: f64, k: usize, p: f64, steps: u64) -> Option<f64> {
        self.rows
            .get(&NoiseKey::new(epsilon, delta, k, p, steps))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_external_noise_table(path: impl AsRef<Path>) -> Result<NoiseTable, AccountingError> {
    let text = fs::read_to_string(path)?;
    parse_noise_table(&text)
}

pub fn parse_noise_table(text: &str) -> Result<NoiseTable, AccountingError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| AccountingError::Table {
        line: 1,
        reason: "missing header".into(),
    })?;
    if header.trim() != "epsilon,delta,k,p,steps,sigma" {
        return Err(AccountingError::Table {
            line: 1,
            reason: format!("unexpected header `{header}`"),
        });
    }
    let mut table = NoiseTable::default();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(AccountingError::Table {
                line: lineno,
                reason: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| AccountingError::Table {
            line: lineno,
            reason: format!("invalid {what}"),
        };
        let epsilon: f64 = fields[0].trim().parse().map_err(|_| bad("epsilon"))?;
        let delta: f64 = fields[1].trim().parse().map_err(|_| bad("delta"))?;
        let k: usize = fields[2].trim().parse().map_err(|_| bad("k"))?;
        let p: f64 = fields[3].trim().parse().map_err(|_| bad("p"))?;
        let steps: u64 = fields[4].trim().parse().map_err(|_| bad("steps"))?;
        let sigma: f64 = fields[5].trim().parse().map_err(|_| bad("sigma"))?;
        let key = NoiseKey::new(epsilon, delta, k, p, steps);
        if table.rows.insert(key, sigma).is_some() {
            return Err(AccountingError::Table {
                line: lineno,
                reason: "duplicate (epsilon,delta,k,p,steps) tuple".into(),
            });
        }
    }
    Ok(table)
}
