//! Concentration bounds and streaming mean/variance.
//!
//! Every bound is evaluated at a per-evaluation failure probability
//! δ' = δ / (|𝓘|·T): one charge per utility index per schedule iteration.
//! Undefined bounds (no samples yet, or too few for a variance estimate)
//! are `f64::INFINITY`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Online count / mean / sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityAccumulator {
    count: u64,
    mean: f64,
    sum_sq_dev: f64,
}

impl UtilityAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = Self::new();
        for &x in samples {
            acc.push(x);
        }
        acc
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.sum_sq_dev += delta * (x - self.mean);
    }

    /// Folds `other` into `self`. The mean is the weighted recombination
    /// M/(M+m)·old + m/(M+m)·batch, written as old + (batch − old)·m/(M+m)
    /// so that equal means combine exactly.
    pub fn merge(&mut self, other: &UtilityAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let old = self.count as f64;
        let batch = other.count as f64;
        let total = old + batch;
        let delta = other.mean - self.mean;
        self.mean += delta * (batch / total);
        self.sum_sq_dev += other.sum_sq_dev + delta * delta * old * batch / total;
        self.count += other.count;
    }

    /// Rebuilds an accumulator from its raw state.
    pub fn from_parts(count: u64, mean: f64, sum_sq_dev: f64) -> Self {
        Self { count, mean, sum_sq_dev: sum_sq_dev.max(0.0) }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sum_sq_dev(&self) -> f64 {
        self.sum_sq_dev
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.sum_sq_dev / (self.count - 1) as f64).max(0.0))
    }
}

/// Failure-probability bookkeeping shared by all bound evaluations in a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundBudget {
    pub c: f64,
    pub index_count: usize,
    pub schedule_length: usize,
    pub delta: f64,
}

impl BoundBudget {
    pub fn new(c: f64, index_count: usize, schedule_length: usize, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {delta}"));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return invalid(format!("range c must be finite and non-negative, got {c}"));
        }
        if index_count == 0 || schedule_length == 0 {
            return invalid("index count and schedule length must be positive");
        }
        Ok(Self { c, index_count, schedule_length, delta })
    }

    /// Same budget with a different schedule length.
    pub fn with_schedule_length(self, schedule_length: usize) -> Self {
        Self { schedule_length: schedule_length.max(1), ..self }
    }

    /// δ' = δ / (|𝓘|·T).
    pub fn per_evaluation_delta(&self) -> f64 {
        self.delta / (self.index_count as f64 * self.schedule_length as f64)
    }

    /// ln(k·|𝓘|·T/δ), computed without forming the (possibly huge) ratio.
    pub fn log_term(&self, k: f64) -> f64 {
        k.ln() + (self.index_count as f64).ln() + (self.schedule_length as f64).ln() - self.delta.ln()
    }

    pub fn hoeffding(&self, m: u64) -> f64 {
        hoeffding_radius(self.c, self.log_term(2.0), m)
    }

    pub fn bennett(&self, variance: f64, m: u64) -> Result<f64> {
        bennett_radius(self.c, self.log_term(2.0), variance, m)
    }

    pub fn empirical_bennett(&self, acc: &UtilityAccumulator) -> f64 {
        match acc.variance() {
            Some(v) => empirical_bennett_radius(self.c, self.log_term(3.0), v, acc.count()),
            None => f64::INFINITY,
        }
    }

    /// min(Hoeffding, empirical Bennett), each charged half of δ'. Below two
    /// samples only Hoeffding applies and it gets the whole of δ'.
    pub fn combined(&self, acc: &UtilityAccumulator) -> f64 {
        let m = acc.count();
        match acc.variance() {
            None => hoeffding_radius(self.c, self.log_term(2.0), m),
            Some(v) => {
                let h = hoeffding_radius(self.c, self.log_term(4.0), m);
                let b = empirical_bennett_radius(self.c, self.log_term(6.0), v, m);
                h.min(b)
            }
        }
    }
}

/// c·√(L / 2m) with L = ln(2/δ').
pub fn hoeffding_radius(c: f64, log_term: f64, m: u64) -> f64 {
    if m == 0 {
        return f64::INFINITY;
    }
    c * (log_term / (2.0 * m as f64)).sqrt()
}

/// c·L/(3m) + √(2vL/m) with L = ln(2/δ').
pub fn bennett_radius(c: f64, log_term: f64, variance: f64, m: u64) -> Result<f64> {
    if !(variance >= 0.0) {
        return invalid(format!("variance must be non-negative, got {variance}"));
    }
    if m == 0 {
        return Ok(f64::INFINITY);
    }
    let m = m as f64;
    Ok(c * log_term / (3.0 * m) + (2.0 * variance * log_term / m).sqrt())
}

/// κ_δ = 1/3 + 1/(2L) with L = ln(3/δ'').
pub fn kappa(log_term: f64) -> f64 {
    1.0 / 3.0 + 1.0 / (2.0 * log_term)
}

/// Deviation bound on the sample variance itself, ε^V.
pub fn variance_radius(c: f64, log_term: f64, variance: f64, m: u64) -> f64 {
    if m < 2 {
        return f64::INFINITY;
    }
    let mf = m as f64;
    let c2l = c * c * log_term;
    let spread = c2l / (mf - 1.0);
    2.0 * c2l / (3.0 * mf) + (kappa(log_term) * spread * spread + 2.0 * c2l * variance / mf).sqrt()
}

/// Empirical Bennett ε^B̂ = c·L/(3m) + √(2(v̂ + ε^V)L/m) with L = ln(3/δ'').
pub fn empirical_bennett_radius(c: f64, log_term: f64, variance: f64, m: u64) -> f64 {
    if m < 2 {
        return f64::INFINITY;
    }
    let mf = m as f64;
    let ev = variance_radius(c, log_term, variance, m);
    c * log_term / (3.0 * mf) + (2.0 * (variance + ev) * log_term / mf).sqrt()
}
