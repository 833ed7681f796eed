//! Brute-force verification of completed runs against the true game.
//!
//! Containment checks enumerate every pure profile. Mixed containment cannot
//! be enumerated, so it is checked on sampled mixed profiles (uniform over
//! each player's simplex) with a 1e-9 additive tolerance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bounds::BoundBudget;
use crate::error::{invalid, Error, Result};
use crate::game::{MixedProfile, NormalFormGame, PureProfile, UtilityIndex};
use crate::psp::{omega_for, PrunerConfig, RunReport, SamplingSchedule, Strategy, Termination};
use crate::simulation::SimulatorSpec;

/// Additive slack absorbing rounding error in mixed-regret comparisons.
pub const MIXED_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessProfile {
    Pure(PureProfile),
    Mixed(MixedProfile),
}

/// A profile that is in the smaller set but not in the larger one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub profile: WitnessProfile,
    /// Regret in the game whose equilibrium set should be contained.
    pub inner_regret: f64,
    /// Regret in the game whose (looser) equilibrium set should contain it.
    pub outer_regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentVerdict {
    pub claim: String,
    pub gamma: f64,
    pub holds: bool,
    pub witness: Option<Witness>,
}

/// Checks E_γ(`inner`) ⊆ E_{γ+slack}(`outer`).
///
/// With `outer = u` and `inner = û` this is the precision direction; swap the
/// arguments for recall.
pub fn check_pure_containment(outer: &NormalFormGame, inner: &NormalFormGame, gamma: f64, slack: f64) -> ContainmentVerdict {
    assert_eq!(outer.space(), inner.space(), "games must share a strategy space");
    let claim = format!("E_{gamma}(inner) ⊆ E_{}(outer)", gamma + slack);
    for rank in 0..inner.space().num_profiles() {
        let r_in = inner.profile_regret_at(rank);
        if r_in > gamma {
            continue;
        }
        let r_out = outer.profile_regret_at(rank);
        if r_out > gamma + slack {
            return ContainmentVerdict {
                claim,
                gamma,
                holds: false,
                witness: Some(Witness {
                    profile: WitnessProfile::Pure(inner.space().unrank(rank)),
                    inner_regret: r_in,
                    outer_regret: r_out,
                }),
            };
        }
    }
    ContainmentVerdict { claim, gamma, holds: true, witness: None }
}

/// Which mixed-containment inequality to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedClaim {
    /// Regret(u) ≤ 2ε + 3γ/2 (regret pruning with Regret↓ > ε + ε̂).
    MiddleGround,
    /// Regret(u) ≤ 2ε + γ (all indices ε-accurate).
    WellEstimated,
}

impl MixedClaim {
    fn limit(self, epsilon: f64, gamma: f64) -> f64 {
        match self {
            MixedClaim::MiddleGround => 2.0 * epsilon + 1.5 * gamma,
            MixedClaim::WellEstimated => 2.0 * epsilon + gamma,
        }
    }
}

/// For each profile σ, with γ = Regret(σ; û), requires Regret(σ; u) within
/// the claim's limit (plus [`MIXED_TOLERANCE`]).
pub fn check_mixed_containment_on(
    u: &NormalFormGame,
    u_hat: &NormalFormGame,
    epsilon: f64,
    profiles: &[MixedProfile],
    claim: MixedClaim,
) -> Result<ContainmentVerdict> {
    let label = match claim {
        MixedClaim::MiddleGround => "mixed: Regret(u) ≤ 2ε + 3γ/2",
        MixedClaim::WellEstimated => "mixed: Regret(u) ≤ 2ε + γ",
    };
    let mut worst_gamma = 0.0f64;
    for sigma in profiles {
        let gamma = u_hat.game_regret_mixed(sigma)?;
        worst_gamma = worst_gamma.max(gamma);
        let truth = u.game_regret_mixed(sigma)?;
        if truth > claim.limit(epsilon, gamma) + MIXED_TOLERANCE {
            return Ok(ContainmentVerdict {
                claim: label.into(),
                gamma,
                holds: false,
                witness: Some(Witness {
                    profile: WitnessProfile::Mixed(sigma.clone()),
                    inner_regret: gamma,
                    outer_regret: truth,
                }),
            });
        }
    }
    Ok(ContainmentVerdict { claim: label.into(), gamma: worst_gamma, holds: true, witness: None })
}

/// Draws `count` mixed profiles, each player's distribution uniform on its
/// simplex (normalized unit exponentials).
pub fn sample_mixed_profiles(game: &NormalFormGame, count: usize, seed: u64) -> Vec<MixedProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dists = game
                .strategy_counts()
                .iter()
                .map(|&k| {
                    let mut w: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
                    let total: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x /= total);
                    w
                })
                .collect();
            MixedProfile::new(dists).expect("normalized weights form a distribution")
        })
        .collect()
}

pub fn check_mixed_containment_sampled(
    u: &NormalFormGame,
    u_hat: &NormalFormGame,
    epsilon: f64,
    num_profiles: usize,
    seed: u64,
    claim: MixedClaim,
) -> Result<ContainmentVerdict> {
    let profiles = sample_mixed_profiles(u, num_profiles, seed);
    check_mixed_containment_on(u, u_hat, epsilon, &profiles, claim)
}

/// |u − û| ≤ max{ε, Regret_p(s; û)/2} at every index.
pub fn check_middle_ground_condition(u: &NormalFormGame, u_hat: &NormalFormGame, epsilon: f64) -> bool {
    assert_eq!(u.space(), u_hat.space(), "games must share a strategy space");
    let n = u.num_players();
    (0..u.space().num_profiles()).all(|rank| {
        (0..n).all(|p| {
            let gap = (u.utility(p, rank) - u_hat.utility(p, rank)).abs();
            gap <= epsilon.max(u_hat.regret_at(p, rank) / 2.0)
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionBranch {
    RegretBranch,
    WeBranch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPrediction {
    pub index: UtilityIndex,
    pub predicted_m: f64,
    pub branch: PredictionBranch,
    pub true_regret: f64,
    /// γ* for PS-REG+, ε for PS-REG-M.
    pub regret_threshold: f64,
    pub c: f64,
    pub max_adjacent_variance: f64,
    pub own_variance: f64,
}

/// Inputs to the sample-size prediction, separated from the simulator for
/// direct evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionInputs {
    pub log_term: f64,
    pub c: f64,
    pub epsilon: f64,
    pub true_regret: f64,
    pub regret_threshold: f64,
    /// 10 for PS-REG+, 12.5 for PS-REG-M.
    pub range_coefficient: f64,
    pub max_adjacent_variance: f64,
    pub own_variance: f64,
}

impl PredictionInputs {
    pub fn we_branch(&self) -> f64 {
        2.0 + 2.0 * self.log_term * (5.0 * self.c / (2.0 * self.epsilon) + self.own_variance / self.epsilon.powi(2))
    }

    /// `None` when the true regret does not exceed the threshold.
    pub fn regret_branch(&self) -> Option<f64> {
        let gap = self.true_regret - self.regret_threshold;
        (gap > 0.0).then(|| {
            2.0 + 2.0
                * self.log_term
                * (self.range_coefficient * self.c / gap + 25.0 * self.max_adjacent_variance / (gap * gap))
        })
    }

    pub fn predict(&self) -> (f64, PredictionBranch) {
        let we = self.we_branch();
        match self.regret_branch() {
            Some(r) if r < we => (r, PredictionBranch::RegretBranch),
            _ => (we, PredictionBranch::WeBranch),
        }
    }
}

/// Samples by which `index` is pruned w.h.p. under PS-REG+ or PS-REG-M,
/// using the exact noise variances of `spec`.
pub fn predict_prune_sample_size(
    spec: &SimulatorSpec,
    budget: &BoundBudget,
    index: &UtilityIndex,
    config: PrunerConfig,
) -> Result<EfficiencyPrediction> {
    let (threshold, coefficient) = match config.strategy {
        Strategy::PsRegPlus { gamma_star } => (gamma_star, 10.0),
        Strategy::PsRegM => (config.epsilon, 12.5),
        other => {
            return Err(Error::Unsupported(format!("no sample-size prediction for {other}")));
        }
    };
    let truth = spec.truth();
    let rank = truth.space().check_index(index)?;
    let p = index.player;
    let max_adjacent_variance = truth
        .space()
        .adjacent_ranks(p, rank)
        .map(|r| spec.true_variance(p, r))
        .fold(0.0, f64::max);
    let inputs = PredictionInputs {
        log_term: budget.log_term(3.0),
        c: budget.c,
        epsilon: config.epsilon,
        true_regret: truth.regret_at(p, rank),
        regret_threshold: threshold,
        range_coefficient: coefficient,
        max_adjacent_variance,
        own_variance: spec.true_variance(p, rank),
    };
    let (predicted_m, branch) = inputs.predict();
    Ok(EfficiencyPrediction {
        index: index.clone(),
        predicted_m,
        branch,
        true_regret: inputs.true_regret,
        regret_threshold: threshold,
        c: inputs.c,
        max_adjacent_variance,
        own_variance: inputs.own_variance,
    })
}

/// M_T ≥ c²·ln(2|𝓘|T/δ)/(2ε²) at the budget's T.
pub fn check_omega_sufficiency(schedule: &SamplingSchedule, budget: &BoundBudget, epsilon: f64) -> bool {
    schedule.final_cumulative() as f64 >= omega_for(budget, epsilon)
}

/// All verdicts applicable to a finished run of `report.config.strategy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunVerification {
    pub strategy: Strategy,
    pub epsilon: f64,
    pub terminated_by: Termination,
    pub verdicts: Vec<ContainmentVerdict>,
    pub middle_ground_condition: Option<bool>,
    pub ok: bool,
}

pub fn verify_run(
    truth: &NormalFormGame,
    report: &RunReport,
    mixed_profiles: usize,
    seed: u64,
) -> Result<RunVerification> {
    let u_hat = report.empirical.to_normal_form()?;
    if u_hat.space() != truth.space() {
        return invalid("report and truth have different strategy spaces");
    }
    let eps = report.config.epsilon;
    let strategy = report.config.strategy;
    let mut verdicts = Vec::new();
    let mut middle_ground = None;
    let precision = |g: f64| ContainmentVerdict {
        claim: format!("precision: E_{g}(û) ⊆ E_{}(u)", g + 2.0 * eps),
        ..check_pure_containment(truth, &u_hat, g, 2.0 * eps)
    };
    let recall = |g: f64| ContainmentVerdict {
        claim: format!("recall: E_{g}(u) ⊆ E_{}(û)", g + 2.0 * eps),
        ..check_pure_containment(&u_hat, truth, g, 2.0 * eps)
    };
    // Recall of exact equilibria, shared by every strategy.
    verdicts.push(recall(0.0));
    let precision_gammas: Vec<f64> = match strategy {
        Strategy::PsWe | Strategy::PsRegM => vec![0.0, eps, 2.0 * eps],
        Strategy::PsReg0 => vec![0.0],
        Strategy::PsReg { gamma_star } | Strategy::PsRegPlus { gamma_star } => {
            vec![0.0, gamma_star / 2.0, gamma_star]
        }
    };
    for &g in &precision_gammas {
        verdicts.push(precision(g));
    }
    match strategy {
        Strategy::PsWe => {
            verdicts.push(recall(eps));
            verdicts.push(recall(2.0 * eps));
            verdicts.push(check_mixed_containment_sampled(truth, &u_hat, eps, mixed_profiles, seed, MixedClaim::WellEstimated)?);
        }
        Strategy::PsRegM => {
            middle_ground = Some(check_middle_ground_condition(truth, &u_hat, eps));
            verdicts.push(check_mixed_containment_sampled(truth, &u_hat, eps, mixed_profiles, seed, MixedClaim::MiddleGround)?);
        }
        _ => {}
    }
    let ok = verdicts.iter().all(|v| v.holds) && middle_ground.unwrap_or(true);
    Ok(RunVerification { strategy, epsilon: eps, terminated_by: report.terminated_by, verdicts, middle_ground_condition: middle_ground, ok })
}
