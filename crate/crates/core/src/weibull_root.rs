//! The Weibull shape equation of the quantile/Monte Carlo M-step.
//!
//! For positive samples `q_ik` the shape update solves `g(beta) = h(beta)` with
//!
//! ```text
//! g(beta) = 1 / beta
//! h(beta) = sum(q^beta log q) / sum(q^beta) - mean(log q)
//! ```
//!
//! `g` falls strictly from `inf` to 0 and `h` is nondecreasing with limit
//! `mean(log q_max - log q)`, so the root is unique and lies in
//! `[beta_L, 1 / h(beta_L)]` where `beta_L = 1 / mean(log q_max - log q)`.

use crate::error::FitError;
use crate::root::brent;

/// Default relative tolerance on the shape root.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Spread of `log q` below which the samples count as all equal.
const MIN_SPREAD: f64 = 1e-12;

/// Cached logarithms of the sample matrix.
#[derive(Debug, Clone)]
pub struct ShapeEquationInputs {
    log_q: Vec<f64>,
    /// Multiplicity of each entry of `log_q`; empty means all ones.
    counts: Vec<f64>,
    total: f64,
    log_q_max: f64,
    /// `mean(log q_max - log q)`, the limit of `h` at infinity.
    mean_gap: f64,
}

impl ShapeEquationInputs {
    /// Takes the (flattened) positive samples.
    pub fn new(q: &[f64]) -> Result<Self, FitError> {
        if q.is_empty() {
            return Err(FitError::EmptyMoments);
        }
        let mut log_q = Vec::with_capacity(q.len());
        for &x in q {
            if !(x > 0.0 && x.is_finite()) {
                return Err(FitError::NonPositiveSample(x));
            }
            log_q.push(x.ln());
        }
        Ok(Self::from_logs(log_q))
    }

    /// Takes precomputed finite `log q` values.
    pub fn from_logs(log_q: Vec<f64>) -> Self {
        let log_q_max = log_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total = log_q.len() as f64;
        let mean_gap = log_q.iter().map(|l| log_q_max - l).sum::<f64>() / total;
        Self {
            log_q,
            counts: Vec::new(),
            total,
            log_q_max,
            mean_gap,
        }
    }

    /// Like [`ShapeEquationInputs::new`] with `q[i]` repeated `counts[i]` times.
    pub fn with_counts(q: &[f64], counts: &[f64]) -> Result<Self, FitError> {
        let mut eq = Self::new(q)?;
        assert_eq!(q.len(), counts.len(), "one count per sample");
        eq.total = counts.iter().sum();
        eq.mean_gap = eq
            .log_q
            .iter()
            .zip(counts)
            .map(|(l, c)| c * (eq.log_q_max - l))
            .sum::<f64>()
            / eq.total;
        eq.counts = counts.to_vec();
        Ok(eq)
    }

    /// Number of samples, counting multiplicities.
    pub fn len(&self) -> f64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.log_q.is_empty()
    }

    pub fn log_q(&self) -> &[f64] {
        &self.log_q
    }

    pub fn log_q_max(&self) -> f64 {
        self.log_q_max
    }

    /// `lim_{beta -> inf} h(beta)`.
    pub fn h_limit(&self) -> f64 {
        self.mean_gap
    }

    /// Returns `(sum w, sum w (log q_max - log q))` with `w = exp(-beta (log q_max - log q))`.
    fn weighted_gap(&self, beta: f64) -> (f64, f64) {
        let mut total = 0.0;
        let mut weighted = 0.0;
        for (i, &l) in self.log_q.iter().enumerate() {
            let gap = self.log_q_max - l;
            let w = (-beta * gap).exp() * self.counts.get(i).copied().unwrap_or(1.0);
            total += w;
            weighted += w * gap;
        }
        (total, weighted)
    }

    /// `h(beta)`, evaluated with every power shifted so the largest term is 1.
    pub fn h(&self, beta: f64) -> f64 {
        let (total, weighted) = self.weighted_gap(beta);
        self.mean_gap - weighted / total
    }

    /// `ln(sum q^beta)`.
    pub fn ln_sum_pow(&self, beta: f64) -> f64 {
        let (total, _) = self.weighted_gap(beta);
        beta * self.log_q_max + total.ln()
    }

    /// `(beta_L, beta_U)` bracketing the unique root.
    pub fn beta_bounds(&self) -> Result<(f64, f64), FitError> {
        if !(self.mean_gap >= MIN_SPREAD) {
            return Err(FitError::NoUniqueRoot);
        }
        let lower = 1.0 / self.mean_gap;
        let h_lower = self.h(lower);
        if !(h_lower > 0.0) {
            return Err(FitError::NoUniqueRoot);
        }
        Ok((lower, (1.0 / h_lower).max(lower)))
    }

    /// Solves `g(beta) = h(beta)` inside the bounds to relative tolerance `tol`.
    pub fn solve_beta(&self, tol: f64) -> Result<f64, FitError> {
        let (lower, upper) = self.beta_bounds()?;
        if lower == upper {
            return Ok(lower);
        }
        let root = brent(|b| g_of_beta(b) - self.h(b), lower, upper, tol)?;
        Ok(root.clamp(lower, upper))
    }
}

/// `g(beta) = 1 / beta`.
pub fn g_of_beta(beta: f64) -> f64 {
    1.0 / beta
}
