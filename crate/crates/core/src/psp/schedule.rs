//! Sampling schedules: geometric (well-estimated pruning) and the linear-then-
//! geometric hybrid used by the regret-pruning strategies.
//!
//! Both α and ω depend on the schedule length T through their log terms, and
//! T depends on α and ω. The builders resolve this by fixed-point iteration
//! from T = 1; T grows only logarithmically in itself, so a handful of
//! rounds suffice.

use serde::{Deserialize, Serialize};

use crate::bounds::{hoeffding_radius, BoundBudget};
use crate::error::{config, invalid, Result};

/// 1/3 + √((4 + 2√3)/3): zero-variance empirical Bennett sample-size factor.
pub fn alpha_constant() -> f64 {
    1.0 / 3.0 + ((4.0 + 2.0 * 3f64.sqrt()) / 3.0).sqrt()
}

/// Geometric factor used in the experiments.
pub const DEFAULT_BETA: f64 = 1.1;

/// Hybrid schedule length relative to the geometric one.
pub const HYBRID_LENGTH_FACTOR: f64 = 1.5;

const MAX_FIXED_POINT_ROUNDS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Manual,
    Geometric,
    Hybrid,
}

/// Cumulative sample sizes M_1 < … < M_T (marginals m_t = M_t − M_{t−1}).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    kind: ScheduleKind,
    cumulative: Vec<u64>,
    beta: Option<f64>,
    alpha: f64,
    alpha_prime: Option<f64>,
    omega: f64,
}

impl SamplingSchedule {
    /// A hand-written schedule; α and ω echo M_1 and M_T.
    pub fn from_cumulative(cumulative: Vec<u64>) -> Result<Self> {
        check_cumulative(&cumulative)?;
        let alpha = cumulative[0] as f64;
        let omega = *cumulative.last().unwrap() as f64;
        Ok(Self { kind: ScheduleKind::Manual, cumulative, beta: None, alpha, alpha_prime: None, omega })
    }

    /// A hand-written schedule from marginal sizes.
    pub fn from_marginals(marginals: &[u64]) -> Result<Self> {
        let mut total = 0u64;
        let cumulative = marginals
            .iter()
            .map(|&m| {
                total += m;
                total
            })
            .collect();
        Self::from_cumulative(cumulative)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// T.
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn cumulatives(&self) -> &[u64] {
        &self.cumulative
    }

    /// M_t for 1-based `t` (M_0 = 0).
    pub fn cumulative(&self, t: usize) -> u64 {
        if t == 0 { 0 } else { self.cumulative[t - 1] }
    }

    /// m_t for 1-based `t`.
    pub fn marginal(&self, t: usize) -> u64 {
        self.cumulative(t) - self.cumulative(t - 1)
    }

    pub fn marginals(&self) -> Vec<u64> {
        (1..=self.len()).map(|t| self.marginal(t)).collect()
    }

    pub fn final_cumulative(&self) -> u64 {
        *self.cumulative.last().expect("schedules are non-empty")
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_prime(&self) -> Option<f64> {
        self.alpha_prime
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// The budget re-targeted at this schedule's length.
    pub fn budget(&self, budget: BoundBudget) -> BoundBudget {
        budget.with_schedule_length(self.len())
    }
}

fn check_cumulative(cumulative: &[u64]) -> Result<()> {
    if cumulative.is_empty() {
        return invalid("a schedule needs at least one iteration");
    }
    if cumulative[0] == 0 || cumulative.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("cumulative sample sizes must be positive and strictly increasing");
    }
    Ok(())
}

/// α = K·c·ln(3|𝓘|T/δ)/ε: below this no index can be well estimated.
pub fn alpha_for(budget: &BoundBudget, epsilon: f64) -> f64 {
    alpha_constant() * budget.c * budget.log_term(3.0) / epsilon
}

/// α' = K·2·ln(3|𝓘|T/δ): the zero-variance sample size for a c/2 guarantee.
pub fn alpha_prime_for(budget: &BoundBudget) -> f64 {
    alpha_constant() * 2.0 * budget.log_term(3.0)
}

/// c²·ln(2|𝓘|T/δ)/(2ε²): enough Hoeffding samples for an ε bound at full δ'.
pub fn omega_for(budget: &BoundBudget, epsilon: f64) -> f64 {
    omega_with_log(budget, epsilon, budget.log_term(2.0))
}

/// ω at the Hoeffding budget actually used by the combined bound (δ'/2),
/// i.e. with ln(4|𝓘|T/δ). Always at least [`omega_for`].
pub fn omega_for_combined(budget: &BoundBudget, epsilon: f64) -> f64 {
    omega_with_log(budget, epsilon, budget.log_term(4.0))
}

fn omega_with_log(budget: &BoundBudget, epsilon: f64, log_term: f64) -> f64 {
    budget.c * budget.c * log_term / (2.0 * epsilon * epsilon)
}

fn check_args(epsilon: f64, beta: f64) -> Result<()> {
    if !(beta > 1.0 && beta.is_finite()) {
        return config(format!("geometric factor beta must exceed 1, got {beta}"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return config(format!("epsilon must be positive, got {epsilon}"));
    }
    Ok(())
}

fn geometric_length(alpha: f64, omega: f64, beta: f64) -> usize {
    if omega <= alpha || alpha <= 0.0 {
        return 1;
    }
    ((omega / alpha).ln() / beta.ln()).ceil().max(1.0) as usize
}

fn fixed_point(mut step: impl FnMut(usize) -> usize) -> usize {
    let mut t = 1usize;
    let mut seen = Vec::new();
    for _ in 0..MAX_FIXED_POINT_ROUNDS {
        let next = step(t).max(1);
        if next == t {
            return t;
        }
        if seen.contains(&next) {
            // Oscillation between neighbours: the longer length is safe.
            return seen.iter().copied().chain([t, next]).max().unwrap();
        }
        seen.push(t);
        t = next;
    }
    t
}

/// Makes `cumulative` strictly increasing and long enough that the final
/// Hoeffding bound (as charged by the combined bound) is at most ε.
fn finalize(cumulative: &mut [u64], budget: &BoundBudget, epsilon: f64) {
    let mut prev = 0u64;
    for m in cumulative.iter_mut() {
        *m = (*m).max(prev + 1);
        prev = *m;
    }
    let last = cumulative.last_mut().expect("non-empty");
    let omega = omega_for_combined(budget, epsilon).ceil() as u64;
    *last = (*last).max(omega).max(1);
    while hoeffding_radius(budget.c, budget.log_term(4.0), *last) > epsilon
        || hoeffding_radius(budget.c, budget.log_term(2.0), *last) > epsilon
    {
        *last += 1;
    }
}

fn geometric_cumulatives(alpha: f64, beta: f64, len: usize) -> Vec<u64> {
    (1..=len).map(|t| (alpha * beta.powi(t as i32)).ceil().max(1.0) as u64).collect()
}

/// Geometric schedule M_t = ⌈αβ^t⌉ ending at or beyond ω.
pub fn build_geometric_schedule(budget: &BoundBudget, epsilon: f64, beta: f64) -> Result<SamplingSchedule> {
    check_args(epsilon, beta)?;
    let len = fixed_point(|t| {
        let b = budget.with_schedule_length(t);
        geometric_length(alpha_for(&b, epsilon), omega_for_combined(&b, epsilon), beta)
    });
    let b = budget.with_schedule_length(len);
    let alpha = alpha_for(&b, epsilon);
    let omega = omega_for_combined(&b, epsilon);
    let mut cumulative = geometric_cumulatives(alpha, beta, len);
    finalize(&mut cumulative, &b, epsilon);
    Ok(SamplingSchedule {
        kind: ScheduleKind::Geometric,
        cumulative,
        beta: Some(beta),
        alpha,
        alpha_prime: None,
        omega,
    })
}

fn hybrid_split(total: usize) -> (usize, usize) {
    // total = ⌈1.5·T_we⌉, so recover T_we as the geometric suffix length.
    let geometric = ((total as f64) / HYBRID_LENGTH_FACTOR).floor().max(1.0) as usize;
    (total - geometric, geometric)
}

/// Linear cumulative sizes from α' to α over the first third, then the PS-WE
/// geometric schedule's sizes over the final two-thirds. Bounds in a hybrid
/// run are charged at the longer length T', so α' is evaluated there and the
/// last size is raised if ω at T' demands it. Falls back to the geometric
/// schedule when α' ≥ α.
pub fn build_hybrid_schedule(budget: &BoundBudget, epsilon: f64, beta: f64) -> Result<SamplingSchedule> {
    let we = build_geometric_schedule(budget, epsilon, beta)?;
    let total = (HYBRID_LENGTH_FACTOR * we.len() as f64).ceil() as usize;
    let b = budget.with_schedule_length(total);
    let alpha = we.alpha();
    let alpha_prime = alpha_prime_for(&b);
    if alpha_prime >= alpha {
        return Ok(we);
    }
    let prefix = total - we.len();
    let mut cumulative = Vec::with_capacity(total);
    for i in 0..prefix {
        let x = if prefix == 1 {
            alpha_prime
        } else {
            alpha_prime + (alpha - alpha_prime) * i as f64 / (prefix - 1) as f64
        };
        cumulative.push(x.ceil().max(1.0) as u64);
    }
    cumulative.extend_from_slice(&we.cumulative);
    finalize(&mut cumulative, &b, epsilon);
    Ok(SamplingSchedule {
        kind: ScheduleKind::Hybrid,
        cumulative,
        beta: Some(beta),
        alpha,
        alpha_prime: Some(alpha_prime),
        omega: omega_for_combined(&b, epsilon),
    })
}

/// Length implied by a schedule of length `len` (used to check the fixed
/// point of a built schedule). For a hybrid schedule the geometric suffix
/// length is recovered first.
pub fn implied_length(budget: &BoundBudget, epsilon: f64, beta: f64, kind: ScheduleKind, len: usize) -> usize {
    let geometric = |t: usize| {
        let b = budget.with_schedule_length(t);
        geometric_length(alpha_for(&b, epsilon), omega_for_combined(&b, epsilon), beta)
    };
    match kind {
        ScheduleKind::Hybrid => {
            let (_, t_we) = hybrid_split(len);
            (HYBRID_LENGTH_FACTOR * geometric(t_we) as f64).ceil() as usize
        }
        _ => geometric(len),
    }
}
