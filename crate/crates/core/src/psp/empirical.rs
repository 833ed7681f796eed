use serde::{Deserialize, Serialize};

use crate::bounds::UtilityAccumulator;
use crate::error::{invalid, Error, Result};
use crate::game::{NormalFormGame, StrategySpace, UtilityIndex};

/// Running estimates per utility index: sample statistics and the current
/// (or, for pruned indices, frozen) deviation bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "EmpiricalGameFile", try_from = "EmpiricalGameFile")]
pub struct EmpiricalGame {
    space: StrategySpace,
    pub(crate) accs: Vec<UtilityAccumulator>,
    pub(crate) bounds: Vec<f64>,
}

impl EmpiricalGame {
    /// No samples anywhere; every bound is +∞.
    pub fn empty(space: StrategySpace) -> Self {
        let n = space.num_indices();
        Self { space, accs: vec![UtilityAccumulator::new(); n], bounds: vec![f64::INFINITY; n] }
    }

    /// Builds an empirical game from point estimates (flat layout), e.g. for
    /// replaying a hand-worked trace.
    pub fn from_estimates(strategy_counts: Vec<usize>, means: Vec<f64>, bounds: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        let space = StrategySpace::new(strategy_counts)?;
        let n = space.num_indices();
        if means.len() != n || bounds.len() != n || counts.len() != n {
            return invalid(format!("expected {n} means, bounds and counts"));
        }
        let accs = means
            .iter()
            .zip(&counts)
            .map(|(&m, &k)| UtilityAccumulator::from_parts(k, m, 0.0))
            .collect();
        Ok(Self { space, accs, bounds })
    }

    pub fn space(&self) -> &StrategySpace {
        &self.space
    }

    pub fn accumulators(&self) -> &[UtilityAccumulator] {
        &self.accs
    }

    pub fn mean(&self, player: usize, rank: usize) -> f64 {
        self.accs[self.space.flat_index(player, rank)].mean()
    }

    pub fn bound(&self, player: usize, rank: usize) -> f64 {
        self.bounds[self.space.flat_index(player, rank)]
    }

    pub fn count(&self, player: usize, rank: usize) -> u64 {
        self.accs[self.space.flat_index(player, rank)].count()
    }

    pub fn means(&self) -> Vec<f64> {
        self.accs.iter().map(UtilityAccumulator::mean).collect()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn counts(&self) -> Vec<u64> {
        self.accs.iter().map(UtilityAccumulator::count).collect()
    }

    /// The game of empirical means. Every index must have been sampled.
    pub fn to_normal_form(&self) -> Result<NormalFormGame> {
        if let Some(flat) = self.accs.iter().position(|a| a.count() == 0) {
            return invalid(format!("utility index {flat} was never sampled"));
        }
        NormalFormGame::from_space(self.space.clone(), self.means())
    }

    /// Pure regret on the empirical means, unchecked.
    pub(crate) fn regret_at(&self, player: usize, rank: usize) -> f64 {
        let best = self
            .space
            .adjacent_ranks(player, rank)
            .map(|r| self.mean(player, r))
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.mean(player, rank)
    }

    /// Regret↓: sup over A_{p,s} of (û − ε̂) minus (û + ε̂) at s.
    pub(crate) fn regret_lower_bound_at(&self, player: usize, rank: usize) -> f64 {
        let own = self.bound(player, rank);
        if !own.is_finite() {
            return f64::NEG_INFINITY;
        }
        let mut best = f64::NEG_INFINITY;
        for r in self.space.adjacent_ranks(player, rank) {
            let b = self.bound(player, r);
            if !b.is_finite() {
                return f64::NEG_INFINITY;
            }
            best = best.max(self.mean(player, r) - b);
        }
        best - (self.mean(player, rank) + own)
    }

    pub fn empirical_pure_regret(&self, index: &UtilityIndex) -> Result<f64> {
        let rank = self.space.check_index(index)?;
        if self.space.adjacent_ranks(index.player, rank).any(|r| self.count(index.player, r) == 0) {
            return invalid("an adjacent utility index has not been sampled");
        }
        Ok(self.regret_at(index.player, rank))
    }

    /// −∞ when any adjacent bound is undefined.
    pub fn regret_lower_bound(&self, index: &UtilityIndex) -> Result<f64> {
        let rank = self.space.check_index(index)?;
        Ok(self.regret_lower_bound_at(index.player, rank))
    }
}

/// Serialized form. Non-finite bounds are written as `null`.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct EmpiricalGameFile {
    actions: Vec<usize>,
    counts: Vec<u64>,
    means: Vec<f64>,
    sum_sq_devs: Vec<f64>,
    bounds: Vec<Option<f64>>,
}

impl From<EmpiricalGame> for EmpiricalGameFile {
    fn from(g: EmpiricalGame) -> Self {
        Self {
            actions: g.space.strategy_counts().to_vec(),
            counts: g.counts(),
            means: g.means(),
            sum_sq_devs: g.accs.iter().map(UtilityAccumulator::sum_sq_dev).collect(),
            bounds: g.bounds.iter().map(|&b| b.is_finite().then_some(b)).collect(),
        }
    }
}

impl TryFrom<EmpiricalGameFile> for EmpiricalGame {
    type Error = Error;

    fn try_from(f: EmpiricalGameFile) -> Result<Self> {
        let space = StrategySpace::new(f.actions)?;
        let n = space.num_indices();
        if f.counts.len() != n || f.means.len() != n || f.sum_sq_devs.len() != n || f.bounds.len() != n {
            return invalid("empirical game arrays do not match the strategy space");
        }
        let accs = (0..n)
            .map(|i| UtilityAccumulator::from_parts(f.counts[i], f.means[i], f.sum_sq_devs[i]))
            .collect();
        let bounds = f.bounds.into_iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
        Ok(Self { space, accs, bounds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_lower_bound_by_hand() {
        // One player, two strategies: û = (1.0, 0.2), ε̂ = (0.1, 0.1).
        let g = EmpiricalGame::from_estimates(vec![2], vec![1.0, 0.2], vec![0.1, 0.1], vec![5, 5]).unwrap();
        let rlb = g.regret_lower_bound(&UtilityIndex::new(0, vec![1])).unwrap();
        assert!((rlb - 0.6).abs() < 1e-12);
        let regret = g.empirical_pure_regret(&UtilityIndex::new(0, vec![1])).unwrap();
        assert!((regret - 0.8).abs() < 1e-12);
        assert!(rlb <= regret);
    }

    #[test]
    fn zero_bounds_collapse_to_regret() {
        let g = EmpiricalGame::from_estimates(vec![3], vec![0.3, -1.0, 2.0], vec![0.0; 3], vec![1; 3]).unwrap();
        for s in 0..3 {
            let idx = UtilityIndex::new(0, vec![s]);
            assert_eq!(g.regret_lower_bound(&idx).unwrap(), g.empirical_pure_regret(&idx).unwrap());
        }
    }

    #[test]
    fn uniform_bounds_subtract_twice() {
        let means = vec![0.3, -1.0, 2.0, 0.7];
        let g = EmpiricalGame::from_estimates(vec![4], means, vec![0.25; 4], vec![1; 4]).unwrap();
        for s in 0..4 {
            let idx = UtilityIndex::new(0, vec![s]);
            let r = g.empirical_pure_regret(&idx).unwrap();
            assert!((g.regret_lower_bound(&idx).unwrap() - (r - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn unsampled_neighbours() {
        let g = EmpiricalGame::from_estimates(vec![2], vec![1.0, 0.0], vec![f64::INFINITY, 0.1], vec![0, 3]).unwrap();
        let idx = UtilityIndex::new(0, vec![1]);
        assert_eq!(g.regret_lower_bound(&idx).unwrap(), f64::NEG_INFINITY);
        assert!(g.empirical_pure_regret(&idx).is_err());
        assert!(g.to_normal_form().is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = EmpiricalGame::from_estimates(vec![2, 1], vec![1.8, 0.0, 1.45, 0.0], vec![0.2, f64::INFINITY, 0.5, 0.2], vec![2, 2, 1, 2])
            .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: EmpiricalGame = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }
}
