//! The general progressive sampling loop.
//!
//! Each iteration t draws m_t fresh samples for every active index, folds
//! them into the running means, recomputes deviation bounds at failure
//! probability δ/(|𝓘|T), and then applies the strategy's pruning rule to the
//! post-update state. Pruned indices keep their mean and bound frozen and
//! are never sampled again. The loop ends when no index is active or the
//! schedule runs out.

mod empirical;
mod prune;
mod schedule;

pub use empirical::EmpiricalGame;
pub use prune::{
    prune_decision_reg, prune_decision_reg0, prune_decision_reg_m, prune_decision_reg_plus,
    prune_decision_we, BoundMode, PruneReason, PrunerConfig, Strategy,
};
pub use schedule::{
    alpha_constant, alpha_for, alpha_prime_for, build_geometric_schedule, build_hybrid_schedule,
    implied_length, omega_for, omega_for_combined, SamplingSchedule, ScheduleKind, DEFAULT_BETA,
    HYBRID_LENGTH_FACTOR,
};

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundBudget, UtilityAccumulator};
use crate::error::{config as config_error, Result};
use crate::exec::{self, Execution};
use crate::game::UtilityIndex;
use crate::simulation::Simulator;

/// Computes the deviation bound of an index from its accumulated samples.
pub trait DeviationBound: Sync {
    /// `iteration` is 1-based.
    fn bound(&self, acc: &UtilityAccumulator, iteration: usize) -> f64;
}

impl DeviationBound for BoundBudget {
    fn bound(&self, acc: &UtilityAccumulator, _iteration: usize) -> f64 {
        self.combined(acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub index: UtilityIndex,
    pub reason: PruneReason,
    pub iteration: usize,
    pub samples_at_prune: u64,
    /// The bound the decision was made with (the uniform bound in uniform mode).
    pub bound_at_prune: f64,
    pub frozen_mean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllPruned,
    ScheduleExhausted,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::AllPruned => "all_pruned",
            Termination::ScheduleExhausted => "schedule_exhausted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub cumulative_samples: u64,
    pub active_before: usize,
    pub well_estimated_pruned: usize,
    pub regret_pruned: usize,
    pub active_after: usize,
    /// Smallest bound over all sampled indices after the update.
    pub min_bound: Option<f64>,
    /// Largest bound over the indices active during the iteration.
    pub max_active_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PrunerConfig,
    pub schedule: SamplingSchedule,
    pub terminated_by: Termination,
    pub iterations_run: usize,
    pub profile_queries: u64,
    pub index_queries: u64,
    /// Prune records in flat index order; unpruned indices are absent.
    pub prune_records: Vec<PruneRecord>,
    pub empirical: EmpiricalGame,
    pub trace: Vec<IterationTrace>,
}

impl RunReport {
    pub fn count_pruned(&self, reason: PruneReason) -> usize {
        self.prune_records.iter().filter(|r| r.reason == reason).count()
    }

    pub fn record(&self, index: &UtilityIndex) -> Option<&PruneRecord> {
        self.prune_records.iter().find(|r| &r.index == index)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs with the combined Hoeffding / empirical Bennett bound at `budget`.
pub fn run_psp<S: Simulator>(
    sim: &S,
    schedule: &SamplingSchedule,
    budget: &BoundBudget,
    config: PrunerConfig,
) -> Result<RunReport> {
    run_psp_exec(sim, schedule, budget, config, Execution::default())
}

pub fn run_psp_exec<S: Simulator>(
    sim: &S,
    schedule: &SamplingSchedule,
    budget: &BoundBudget,
    config: PrunerConfig,
    exec: Execution,
) -> Result<RunReport> {
    if budget.schedule_length != schedule.len() {
        return config_error(format!(
            "budget is for T = {} but the schedule has {} iterations",
            budget.schedule_length,
            schedule.len()
        ));
    }
    if budget.index_count != sim.space().num_indices() {
        return config_error(format!(
            "budget is for {} indices but the game has {}",
            budget.index_count,
            sim.space().num_indices()
        ));
    }
    let c = sim.range_width();
    if (budget.c - c).abs() > 1e-12 * c.max(1.0) {
        return config_error(format!("budget range {} does not match simulator range {c}", budget.c));
    }
    run_psp_with(sim, schedule, budget, config, exec)
}

const FILL_CHUNK: usize = 1024;

/// The loop itself, with any bound model (used to replay scripted traces).
pub fn run_psp_with<S: Simulator, B: DeviationBound>(
    sim: &S,
    schedule: &SamplingSchedule,
    bounds_model: &B,
    config: PrunerConfig,
    exec: Execution,
) -> Result<RunReport> {
    let space = sim.space().clone();
    let n = space.num_players();
    let num_indices = space.num_indices();
    let mut game = EmpiricalGame::empty(space.clone());
    let mut active = vec![true; num_indices];
    let mut records: Vec<Option<PruneRecord>> = vec![None; num_indices];
    let mut trace = Vec::with_capacity(schedule.len());
    let mut profile_queries = 0u64;
    let mut terminated_by = Termination::ScheduleExhausted;
    let mut iterations_run = 0;

    for t in 1..=schedule.len() {
        iterations_run = t;
        let m_t = schedule.marginal(t);
        let active_before = active.iter().filter(|&&a| a).count();
        let live_profiles = active.chunks(n).filter(|c| c.iter().any(|&a| a)).count();
        profile_queries += m_t * live_profiles as u64;

        // Update phase: sample active indices, recompute their bounds.
        {
            let active = &active;
            exec::for_each_chunk_pair(exec, &mut game.accs, &mut game.bounds, n, |rank, accs, bounds| {
                let mut buf = [0.0f64; FILL_CHUNK];
                for p in 0..n {
                    if !active[rank * n + p] {
                        continue;
                    }
                    let mut batch = UtilityAccumulator::new();
                    let mut drawn = 0u64;
                    while drawn < m_t {
                        let k = (m_t - drawn).min(FILL_CHUNK as u64) as usize;
                        sim.fill(p, rank, accs[p].count() + drawn, &mut buf[..k]);
                        for &x in &buf[..k] {
                            batch.push(x);
                        }
                        drawn += k as u64;
                    }
                    accs[p].merge(&batch);
                    bounds[p] = bounds_model.bound(&accs[p], t);
                }
            });
        }

        let uniform = match config.bound_mode() {
            BoundMode::Uniform => Some(
                game.bounds
                    .iter()
                    .zip(&active)
                    .filter(|(_, &a)| a)
                    .map(|(&b, _)| b)
                    .fold(f64::NEG_INFINITY, f64::max),
            ),
            BoundMode::NonUniform => None,
        };
        let max_active_bound = game
            .bounds
            .iter()
            .zip(&active)
            .filter(|(_, &a)| a)
            .map(|(&b, _)| b)
            .fold(f64::NEG_INFINITY, f64::max);

        // Prune phase: every decision sees the same post-update state.
        let decisions = {
            let game = &game;
            let active = &active;
            exec::map_indexed(exec, num_indices, |flat| {
                if !active[flat] {
                    return None;
                }
                decide(game, flat / n, flat % n, config, uniform)
            })
        };

        let cumulative = schedule.cumulative(t);
        let (mut we, mut reg) = (0, 0);
        for (flat, decision) in decisions.into_iter().enumerate() {
            let Some(reason) = decision else { continue };
            let (rank, p) = (flat / n, flat % n);
            active[flat] = false;
            match reason {
                PruneReason::WellEstimated => we += 1,
                PruneReason::Regret => reg += 1,
            }
            debug_assert_eq!(game.accs[flat].count(), cumulative);
            records[flat] = Some(PruneRecord {
                index: UtilityIndex::new(p, space.unrank(rank)),
                reason,
                iteration: t,
                samples_at_prune: cumulative,
                bound_at_prune: uniform.unwrap_or(game.bounds[flat]),
                frozen_mean: game.accs[flat].mean(),
            });
        }
        let active_after = active_before - we - reg;
        let min_bound = game.bounds.iter().copied().fold(f64::INFINITY, f64::min);
        trace.push(IterationTrace {
            iteration: t,
            cumulative_samples: cumulative,
            active_before,
            well_estimated_pruned: we,
            regret_pruned: reg,
            active_after,
            min_bound: min_bound.is_finite().then_some(min_bound),
            max_active_bound: max_active_bound.is_finite().then_some(max_active_bound),
        });
        if active_after == 0 {
            terminated_by = Termination::AllPruned;
            break;
        }
    }

    let index_queries = game.accs.iter().map(UtilityAccumulator::count).sum();
    Ok(RunReport {
        config,
        schedule: schedule.clone(),
        terminated_by,
        iterations_run,
        profile_queries,
        index_queries,
        prune_records: records.into_iter().flatten().collect(),
        empirical: game,
        trace,
    })
}

fn decide(
    game: &EmpiricalGame,
    rank: usize,
    player: usize,
    config: PrunerConfig,
    uniform: Option<f64>,
) -> Option<PruneReason> {
    let eps = config.epsilon;
    let own = uniform.unwrap_or_else(|| game.bound(player, rank));
    if prune_decision_we(own, eps) {
        return Some(PruneReason::WellEstimated);
    }
    let regret_prune = match config.strategy {
        Strategy::PsWe => false,
        Strategy::PsReg0 => prune_decision_reg0(game.regret_at(player, rank), own),
        Strategy::PsReg { gamma_star } => prune_decision_reg(game.regret_at(player, rank), own, eps, gamma_star),
        Strategy::PsRegPlus { gamma_star } => {
            prune_decision_reg_plus(game.regret_lower_bound_at(player, rank), own, eps, gamma_star)
        }
        Strategy::PsRegM => prune_decision_reg_m(game.regret_lower_bound_at(player, rank), own, eps),
    };
    regret_prune.then_some(PruneReason::Regret)
}
