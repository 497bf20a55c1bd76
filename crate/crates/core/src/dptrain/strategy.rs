//! Banded lower-triangular strategy matrices with unit column norms.
//!
//! A strategy of band `b` has `C[i][j] = 0` whenever `i - j >= b`, so each
//! column carries at most `b` coefficients and `b = 1` is the identity
//! (independent noise). The optimized constructor fits the `b` Toeplitz
//! coefficients that minimize the factorization error `||A C^-1||_F^2` for
//! the prefix-sum workload `A` (all-ones lower triangular), which is what
//! the correlated noise ultimately multiplies.

/// Column-major band storage: `cols[j * band + r]` holds `C[j + r][j]`,
/// zero-padded past the matrix edge. Diagonals are positive and every
/// column has unit Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyMatrix {
    steps: usize,
    band: usize,
    cols: Vec<f64>,
}

impl StrategyMatrix {
    /// The identity strategy: independent per-step noise.
    pub fn identity(steps: usize) -> Self {
        assert!(steps >= 1);
        Self {
            steps,
            band: 1,
            cols: vec![1.0; steps],
        }
    }

    /// Builds a column-normalized banded matrix from Toeplitz coefficients
    /// (`coeffs[0]` on the diagonal, which must be positive).
    pub fn from_toeplitz(steps: usize, coeffs: &[f64]) -> Self {
        let band = coeffs.len();
        assert!(band >= 1 && band <= steps, "need 1 <= band <= steps");
        assert!(coeffs[0] > 0.0, "diagonal must be positive");
        let mut cols = vec![0.0; steps * band];
        for j in 0..steps {
            let take = band.min(steps - j);
            let norm = coeffs[..take]
                .iter()
                .map(|c| c * c)
                .sum::<f64>()
                .sqrt();
            for r in 0..take {
                cols[j * band + r] = coeffs[r] / norm;
            }
        }
        Self { steps, band, cols }
    }

    /// Builds a column-normalized matrix from raw per-column bands
    /// (`raw[j]` holds `C[j..j+band][j]`, at most `band` entries, positive
    /// leading entry).
    pub fn from_columns(steps: usize, band: usize, raw: &[Vec<f64>]) -> Self {
        assert!(band >= 1 && band <= steps && raw.len() == steps);
        let mut cols = vec![0.0; steps * band];
        for (j, col) in raw.iter().enumerate() {
            let take = band.min(steps - j);
            assert!(col.len() >= take && col[0] > 0.0);
            let norm = col[..take].iter().map(|c| c * c).sum::<f64>().sqrt();
            for r in 0..take {
                cols[j * band + r] = col[r] / norm;
            }
        }
        Self { steps, band, cols }
    }

    /// Toeplitz coefficients minimizing the prefix-sum factorization error,
    /// found by compass (coordinate pattern) search from the identity; the
    /// search only ever accepts improvements, so the result is never worse
    /// than the identity strategy.
    pub fn optimized(steps: usize, band: usize) -> Self {
        assert!(band >= 1 && band <= steps);
        if band == 1 {
            return Self::identity(steps);
        }
        let mut coeffs = vec![0.0; band];
        coeffs[0] = 1.0;
        let mut best = factorization_loss(&Self::from_toeplitz(steps, &coeffs));
        let mut step = 0.25;
        while step > 1e-4 {
            let mut improved = false;
            for i in 0..band {
                for dir in [1.0, -1.0] {
                    let mut cand = coeffs.clone();
                    cand[i] += dir * step;
                    if cand[0] < 1e-6 {
                        continue;
                    }
                    let loss = factorization_loss(&Self::from_toeplitz(steps, &cand));
                    if loss < best - 1e-12 {
                        coeffs = cand;
                        best = loss;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Self::from_toeplitz(steps, &coeffs)
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn band(&self) -> usize {
        self.band
    }

    /// `C[i][j]`, zero outside the band.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i < j || i - j >= self.band {
            0.0
        } else {
            self.cols[j * self.band + (i - j)]
        }
    }

    /// Band coefficients of column `j`, diagonal first.
    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.band..(j + 1) * self.band]
    }

    /// Solves `C x = e_j` by banded forward substitution.
    pub fn solve_unit_column(&self, j: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.steps];
        for i in j..self.steps {
            let mut rhs = if i == j { 1.0 } else { 0.0 };
            let lo = i.saturating_sub(self.band - 1).max(j);
            for (l, xl) in x.iter().enumerate().take(i).skip(lo) {
                rhs -= self.entry(i, l) * xl;
            }
            x[i] = rhs / self.entry(i, i);
        }
        x
    }
}

/// `||A C^-1||_F^2` for the all-ones lower-triangular workload `A`: the
/// squared prefix sums of every column of `C^-1`.
pub fn factorization_loss(strategy: &StrategyMatrix) -> f64 {
    let mut total = 0.0;
    for j in 0..strategy.steps() {
        let x = strategy.solve_unit_column(j);
        let mut run = 0.0;
        for &v in &x[j..] {
            run += v;
            total += run * run;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_one_is_identity() {
        let c = StrategyMatrix::optimized(8, 1);
        assert_eq!(c, StrategyMatrix::identity(8));
        assert_eq!(c.entry(3, 3), 1.0);
        assert_eq!(c.entry(4, 3), 0.0);
    }

    #[test]
    fn columns_have_unit_norm() {
        for (t, b) in [(8usize, 3usize), (16, 5), (12, 12)] {
            let c = StrategyMatrix::optimized(t, b);
            for j in 0..t {
                let norm: f64 = (0..t).map(|i| c.entry(i, j).powi(2)).sum();
                assert!((norm - 1.0).abs() <= 1e-12, "T={t} b={b} col {j}: {norm}");
                assert!(c.entry(j, j) > 0.0);
            }
        }
    }

    #[test]
    fn optimized_beats_identity() {
        for (t, b) in [(8usize, 2usize), (16, 4), (32, 8), (24, 3)] {
            let opt = factorization_loss(&StrategyMatrix::optimized(t, b));
            let id = factorization_loss(&StrategyMatrix::identity(t));
            assert!(opt <= id, "T={t} b={b}: {opt} vs identity {id}");
            assert!(opt < id * 0.99, "T={t} b={b}: no real improvement");
        }
    }

    #[test]
    fn identity_loss_is_workload_norm() {
        // ||A I||_F^2 = sum_j (T - j) = T(T+1)/2.
        let t = 10;
        let loss = factorization_loss(&StrategyMatrix::identity(t));
        assert!((loss - (t * (t + 1) / 2) as f64).abs() < 1e-9);
    }

    #[test]
    fn solve_unit_column_inverts() {
        let c = StrategyMatrix::from_toeplitz(12, &[1.0, -0.4, 0.1]);
        for j in [0usize, 5, 11] {
            let x = c.solve_unit_column(j);
            // Multiply back: C x should be e_j.
            for i in 0usize..12 {
                let mut acc = 0.0;
                for l in i.saturating_sub(2)..=i {
                    acc += c.entry(i, l) * x[l];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc - want).abs() < 1e-12, "row {i} of col {j}");
            }
        }
    }
}
