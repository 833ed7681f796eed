//! Pruning strategies and their decision rules.
//!
//! Each comparison is exactly the one its correctness argument uses:
//! well-estimated `≤`, PS-REG-0 `≥`, the others strict `>`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// One bound, the max over active indices, for every index.
    Uniform,
    /// A separate bound per index.
    NonUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneReason {
    WellEstimated,
    Regret,
}

/// The five progressive sampling variants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Strategy {
    /// Well-estimated pruning only.
    PsWe,
    /// Uniform bounds; regret-prune when Regret ≥ 2ε̂.
    PsReg0,
    /// Uniform bounds; regret-prune when Regret > max{2ε̂, γ* + ε + ε̂}.
    PsReg { gamma_star: f64 },
    /// Per-index bounds; regret-prune when Regret↓ > max{0, γ* + ε − ε̂_p(s)}.
    PsRegPlus { gamma_star: f64 },
    /// Per-index bounds; regret-prune when Regret↓ > ε + ε̂_p(s).
    PsRegM,
}

impl Strategy {
    pub fn bound_mode(&self) -> BoundMode {
        match self {
            Strategy::PsReg0 | Strategy::PsReg { .. } => BoundMode::Uniform,
            Strategy::PsWe | Strategy::PsRegPlus { .. } | Strategy::PsRegM => BoundMode::NonUniform,
        }
    }

    pub fn gamma_star(&self) -> Option<f64> {
        match *self {
            Strategy::PsReg { gamma_star } | Strategy::PsRegPlus { gamma_star } => Some(gamma_star),
            _ => None,
        }
    }

    pub fn uses_regret_pruning(&self) -> bool {
        !matches!(self, Strategy::PsWe)
    }

    /// Short name without parameters.
    pub fn family(&self) -> &'static str {
        match self {
            Strategy::PsWe => "ps-we",
            Strategy::PsReg0 => "ps-reg0",
            Strategy::PsReg { .. } => "ps-reg",
            Strategy::PsRegPlus { .. } => "ps-reg+",
            Strategy::PsRegM => "ps-reg-m",
        }
    }

    /// Stable numeric id used when deriving per-cell seeds.
    pub fn id(&self) -> u64 {
        match self {
            Strategy::PsWe => 0,
            Strategy::PsReg0 => 1,
            Strategy::PsReg { .. } => 2,
            Strategy::PsRegPlus { .. } => 3,
            Strategy::PsRegM => 4,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gamma_star() {
            Some(g) => write!(f, "{}:{}", self.family(), g),
            None => f.write_str(self.family()),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Parses `ps-we`, `ps-reg0`, `ps-reg:G`, `ps-reg+:G`, `ps-reg-m` with a
    /// numeric γ*.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let gamma = |param: Option<&str>| -> Result<f64> {
            let g: f64 = param
                .ok_or_else(|| Error::Config(format!("{name} needs a gamma parameter")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad gamma in {s:?}")))?;
            if !(g >= 0.0 && g.is_finite()) {
                return config(format!("gamma must be non-negative, got {g}"));
            }
            Ok(g)
        };
        let strategy = match name.to_ascii_lowercase().as_str() {
            "ps-we" => Strategy::PsWe,
            "ps-reg0" | "ps-reg-0" => Strategy::PsReg0,
            "ps-reg" => Strategy::PsReg { gamma_star: gamma(param)? },
            "ps-reg+" => Strategy::PsRegPlus { gamma_star: gamma(param)? },
            "ps-reg-m" => Strategy::PsRegM,
            _ => return config(format!("unknown algorithm {s:?}")),
        };
        if param.is_some() && strategy.gamma_star().is_none() {
            return config(format!("{name} takes no parameter"));
        }
        Ok(strategy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunerConfig {
    pub strategy: Strategy,
    pub epsilon: f64,
}

impl PrunerConfig {
    pub fn new(strategy: Strategy, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return config(format!("target error must be positive, got {epsilon}"));
        }
        if let Some(g) = strategy.gamma_star() {
            if !(g >= 0.0 && g.is_finite()) {
                return config(format!("gamma* must be non-negative, got {g}"));
            }
        }
        Ok(Self { strategy, epsilon })
    }

    pub fn bound_mode(&self) -> BoundMode {
        self.strategy.bound_mode()
    }
}

pub fn prune_decision_we(bound: f64, epsilon: f64) -> bool {
    bound <= epsilon
}

pub fn prune_decision_reg0(empirical_regret: f64, uniform_bound: f64) -> bool {
    empirical_regret >= 2.0 * uniform_bound
}

pub fn prune_decision_reg(empirical_regret: f64, uniform_bound: f64, epsilon: f64, gamma_star: f64) -> bool {
    empirical_regret > (2.0 * uniform_bound).max(gamma_star + epsilon + uniform_bound)
}

pub fn prune_decision_reg_plus(regret_lower_bound: f64, own_bound: f64, epsilon: f64, gamma_star: f64) -> bool {
    regret_lower_bound > (gamma_star + epsilon - own_bound).max(0.0)
}

pub fn prune_decision_reg_m(regret_lower_bound: f64, own_bound: f64, epsilon: f64) -> bool {
    regret_lower_bound > epsilon + own_bound
}
