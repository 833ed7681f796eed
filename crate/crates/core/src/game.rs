//! Exact normal-form games: profiles, regret, and ε-Nash enumeration.
//!
//! Utilities are stored densely in row-major profile order (the last player's
//! strategy varies fastest), player-minor: the utility of player `p` at the
//! profile with rank `r` lives at `r * num_players + p`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the per-player probability mass of a [`MixedProfile`].
pub const MIXED_SUM_TOLERANCE: f64 = 1e-9;

/// The pure strategy profile space of a game, with rank arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategySpace {
    strategy_counts: Vec<usize>,
    strides: Vec<usize>,
    num_profiles: usize,
}

impl StrategySpace {
    pub fn new(strategy_counts: Vec<usize>) -> Result<Self> {
        if strategy_counts.is_empty() {
            return invalid("a game needs at least one player");
        }
        if let Some(p) = strategy_counts.iter().position(|&k| k == 0) {
            return invalid(format!("player {p} has no strategies"));
        }
        let mut strides = vec![1usize; strategy_counts.len()];
        for p in (0..strategy_counts.len().saturating_sub(1)).rev() {
            strides[p] = strides[p + 1]
                .checked_mul(strategy_counts[p + 1])
                .ok_or_else(|| Error::InvalidInput("profile space too large".into()))?;
        }
        let num_profiles = strides[0]
            .checked_mul(strategy_counts[0])
            .ok_or_else(|| Error::InvalidInput("profile space too large".into()))?;
        Ok(Self { strategy_counts, strides, num_profiles })
    }

    pub fn num_players(&self) -> usize {
        self.strategy_counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.strategy_counts
    }

    pub fn num_profiles(&self) -> usize {
        self.num_profiles
    }

    /// |𝓘|: one utility index per (player, profile).
    pub fn num_indices(&self) -> usize {
        self.num_profiles * self.num_players()
    }

    pub fn rank(&self, profile: &PureProfile) -> Result<usize> {
        self.check_profile(profile)?;
        Ok(profile.0.iter().zip(&self.strides).map(|(s, k)| s * k).sum())
    }

    pub fn unrank(&self, rank: usize) -> PureProfile {
        debug_assert!(rank < self.num_profiles);
        PureProfile(
            self.strides
                .iter()
                .zip(&self.strategy_counts)
                .map(|(stride, count)| (rank / stride) % count)
                .collect(),
        )
    }

    /// Strategy played by `player` in the profile with rank `rank`.
    pub fn strategy_of(&self, rank: usize, player: usize) -> usize {
        (rank / self.strides[player]) % self.strategy_counts[player]
    }

    /// Ranks of A_{p,s}: `rank` with `player`'s strategy replaced by each of
    /// its strategies in ascending order (includes `rank` itself).
    pub fn adjacent_ranks(&self, player: usize, rank: usize) -> impl Iterator<Item = usize> + '_ {
        let stride = self.strides[player];
        let base = rank - self.strategy_of(rank, player) * stride;
        (0..self.strategy_counts[player]).map(move |t| base + t * stride)
    }

    /// Flat position of the utility index (player, rank).
    pub fn flat_index(&self, player: usize, rank: usize) -> usize {
        rank * self.num_players() + player
    }

    pub fn check_profile(&self, profile: &PureProfile) -> Result<()> {
        if profile.0.len() != self.num_players() {
            return invalid(format!(
                "profile has {} strategies, game has {} players",
                profile.0.len(),
                self.num_players()
            ));
        }
        for (p, (&s, &k)) in profile.0.iter().zip(&self.strategy_counts).enumerate() {
            if s >= k {
                return invalid(format!("player {p} strategy {s} out of range (has {k})"));
            }
        }
        Ok(())
    }

    pub fn check_index(&self, index: &UtilityIndex) -> Result<usize> {
        if index.player >= self.num_players() {
            return invalid(format!("player {} out of range", index.player));
        }
        self.rank(&index.profile)
    }
}

/// One strategy index per player, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PureProfile(pub Vec<usize>);

impl From<Vec<usize>> for PureProfile {
    fn from(v: Vec<usize>) -> Self {
        PureProfile(v)
    }
}

/// A (player, pure profile) pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtilityIndex {
    pub player: usize,
    pub profile: PureProfile,
}

impl UtilityIndex {
    pub fn new(player: usize, profile: impl Into<PureProfile>) -> Self {
        Self { player, profile: profile.into() }
    }
}

/// Per-player probability distributions over pure strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    distributions: Vec<Vec<f64>>,
}

impl MixedProfile {
    /// Validates non-negativity and unit mass (within [`MIXED_SUM_TOLERANCE`]).
    /// Inputs outside tolerance are rejected, never renormalized.
    pub fn new(distributions: Vec<Vec<f64>>) -> Result<Self> {
        for (p, dist) in distributions.iter().enumerate() {
            if dist.is_empty() {
                return invalid(format!("player {p} has an empty distribution"));
            }
            if dist.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return invalid(format!("player {p} has a negative or non-finite probability"));
            }
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > MIXED_SUM_TOLERANCE {
                return invalid(format!("player {p} probabilities sum to {total}"));
            }
        }
        Ok(Self { distributions })
    }

    /// The point mass on `profile`.
    pub fn point_mass(space: &StrategySpace, profile: &PureProfile) -> Result<Self> {
        space.check_profile(profile)?;
        let distributions = space
            .strategy_counts()
            .iter()
            .zip(&profile.0)
            .map(|(&k, &s)| {
                let mut d = vec![0.0; k];
                d[s] = 1.0;
                d
            })
            .collect();
        Ok(Self { distributions })
    }

    pub fn distributions(&self) -> &[Vec<f64>] {
        &self.distributions
    }

    fn check_against(&self, space: &StrategySpace) -> Result<()> {
        if self.distributions.len() != space.num_players()
            || self.distributions.iter().zip(space.strategy_counts()).any(|(d, &k)| d.len() != k)
        {
            return invalid("mixed profile shape does not match the game");
        }
        Ok(())
    }
}

/// A normal-form game with a dense utility tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalFormGame {
    space: StrategySpace,
    utilities: Vec<f64>,
}

impl NormalFormGame {
    pub fn new(strategy_counts: Vec<usize>, utilities: Vec<f64>) -> Result<Self> {
        let space = StrategySpace::new(strategy_counts)?;
        Self::from_space(space, utilities)
    }

    pub fn from_space(space: StrategySpace, utilities: Vec<f64>) -> Result<Self> {
        if utilities.len() != space.num_indices() {
            return invalid(format!(
                "expected {} utilities, got {}",
                space.num_indices(),
                utilities.len()
            ));
        }
        if utilities.iter().any(|u| !u.is_finite()) {
            return invalid("utilities must be finite");
        }
        Ok(Self { space, utilities })
    }

    /// Builds a game from a utility function over (player, profile).
    pub fn from_fn(
        strategy_counts: Vec<usize>,
        mut f: impl FnMut(usize, &PureProfile) -> f64,
    ) -> Result<Self> {
        let space = StrategySpace::new(strategy_counts)?;
        let n = space.num_players();
        let mut utilities = Vec::with_capacity(space.num_indices());
        for rank in 0..space.num_profiles() {
            let profile = space.unrank(rank);
            for p in 0..n {
                utilities.push(f(p, &profile));
            }
        }
        Self::from_space(space, utilities)
    }

    pub fn space(&self) -> &StrategySpace {
        &self.space
    }

    pub fn num_players(&self) -> usize {
        self.space.num_players()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        self.space.strategy_counts()
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }

    pub fn utility(&self, player: usize, rank: usize) -> f64 {
        self.utilities[self.space.flat_index(player, rank)]
    }

    pub fn utility_at(&self, index: &UtilityIndex) -> Result<f64> {
        let rank = self.space.check_index(index)?;
        Ok(self.utility(index.player, rank))
    }

    pub fn min_utility(&self) -> f64 {
        self.utilities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_utility(&self) -> f64 {
        self.utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// A_{p,s} in ascending order of `p`'s strategy.
    pub fn adjacent_profiles(&self, index: &UtilityIndex) -> Result<Vec<PureProfile>> {
        let rank = self.space.check_index(index)?;
        Ok(self
            .space
            .adjacent_ranks(index.player, rank)
            .map(|r| self.space.unrank(r))
            .collect())
    }

    /// Regret of `player` at the profile with rank `rank`, without validation.
    pub fn regret_at(&self, player: usize, rank: usize) -> f64 {
        let best = self
            .space
            .adjacent_ranks(player, rank)
            .map(|r| self.utility(player, r))
            .fold(f64::NEG_INFINITY, f64::max);
        best - self.utility(player, rank)
    }

    pub fn pure_regret(&self, index: &UtilityIndex) -> Result<f64> {
        let rank = self.space.check_index(index)?;
        Ok(self.regret_at(index.player, rank))
    }

    /// Max over players of the pure regret at the profile with rank `rank`.
    pub fn profile_regret_at(&self, rank: usize) -> f64 {
        (0..self.num_players()).map(|p| self.regret_at(p, rank)).fold(0.0, f64::max)
    }

    pub fn game_regret_pure(&self, profile: &PureProfile) -> Result<f64> {
        let rank = self.space.rank(profile)?;
        Ok(self.profile_regret_at(rank))
    }

    /// Expected utility to `player` of each of its pure deviations against
    /// the opponents' mixtures.
    fn deviation_values(&self, profile: &MixedProfile, player: usize) -> Vec<f64> {
        let dists = profile.distributions();
        let mut values = vec![0.0; self.strategy_counts()[player]];
        for rank in 0..self.space.num_profiles() {
            let mut weight = 1.0;
            for (q, dist) in dists.iter().enumerate() {
                if q != player {
                    weight *= dist[self.space.strategy_of(rank, q)];
                }
            }
            if weight != 0.0 {
                values[self.space.strategy_of(rank, player)] += weight * self.utility(player, rank);
            }
        }
        values
    }

    /// Expected utility of `player` under a mixed profile.
    pub fn expected_utility(&self, profile: &MixedProfile, player: usize) -> Result<f64> {
        profile.check_against(&self.space)?;
        if player >= self.num_players() {
            return invalid(format!("player {player} out of range"));
        }
        let values = self.deviation_values(profile, player);
        Ok(profile.distributions()[player].iter().zip(&values).map(|(w, v)| w * v).sum())
    }

    /// Best pure deviation value minus the expected utility of the mixture.
    pub fn mixed_regret(&self, profile: &MixedProfile, player: usize) -> Result<f64> {
        profile.check_against(&self.space)?;
        if player >= self.num_players() {
            return invalid(format!("player {player} out of range"));
        }
        let values = self.deviation_values(profile, player);
        let own: f64 = profile.distributions()[player].iter().zip(&values).map(|(w, v)| w * v).sum();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((best - own).max(0.0))
    }

    pub fn game_regret_mixed(&self, profile: &MixedProfile) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in 0..self.num_players() {
            worst = worst.max(self.mixed_regret(profile, p)?);
        }
        Ok(worst)
    }

    /// E_ε: every pure profile whose regret is at most `eps`, in rank order.
    pub fn epsilon_pure_nash_set(&self, eps: f64) -> Result<Vec<PureProfile>> {
        if !(eps >= 0.0) {
            return invalid(format!("eps must be non-negative, got {eps}"));
        }
        Ok(self
            .epsilon_pure_nash_ranks(eps)
            .into_iter()
            .map(|r| self.space.unrank(r))
            .collect())
    }

    pub(crate) fn epsilon_pure_nash_ranks(&self, eps: f64) -> Vec<usize> {
        (0..self.space.num_profiles()).filter(|&r| self.profile_regret_at(r) <= eps).collect()
    }
}

/// On-disk game: `{ "players": n, "actions": [k_1..k_n], "utilities": [...] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub players: usize,
    pub actions: Vec<usize>,
    pub utilities: Vec<f64>,
}

impl From<&NormalFormGame> for GameFile {
    fn from(game: &NormalFormGame) -> Self {
        GameFile {
            players: game.num_players(),
            actions: game.strategy_counts().to_vec(),
            utilities: game.utilities.clone(),
        }
    }
}

impl TryFrom<GameFile> for NormalFormGame {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        if file.players != file.actions.len() {
            return invalid(format!(
                "\"players\" is {} but {} action counts given",
                file.players,
                file.actions.len()
            ));
        }
        NormalFormGame::new(file.actions, file.utilities)
    }
}

impl NormalFormGame {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GameFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counterexample() -> NormalFormGame {
        // Player A: a1, a2. Player B: b only.
        NormalFormGame::new(vec![2, 1], vec![2.0, 0.0, 1.0, 0.0]).unwrap()
    }

    fn matching_pennies() -> NormalFormGame {
        NormalFormGame::from_fn(vec![2, 2], |p, s| {
            let same = s.0[0] == s.0[1];
            let u = if same { 1.0 } else { -1.0 };
            if p == 0 { u } else { -u }
        })
        .unwrap()
    }

    fn prisoners_dilemma() -> NormalFormGame {
        // 0 = cooperate, 1 = defect.
        let table = [[(-1.0, -1.0), (-3.0, 0.0)], [(0.0, -3.0), (-2.0, -2.0)]];
        NormalFormGame::from_fn(vec![2, 2], |p, s| {
            let (a, b) = table[s.0[0]][s.0[1]];
            if p == 0 { a } else { b }
        })
        .unwrap()
    }

    #[test]
    fn adjacent_profiles_two_player() {
        let g = counterexample();
        let adj = g.adjacent_profiles(&UtilityIndex::new(0, vec![1, 0])).unwrap();
        assert_eq!(adj, vec![PureProfile(vec![0, 0]), PureProfile(vec![1, 0])]);
        let adj_b = g.adjacent_profiles(&UtilityIndex::new(1, vec![1, 0])).unwrap();
        assert_eq!(adj_b, vec![PureProfile(vec![1, 0])]);
    }

    #[test]
    fn adjacent_profiles_three_player_matches_filter() {
        let g = NormalFormGame::from_fn(vec![2, 2, 2], |_, _| 0.0).unwrap();
        let all: Vec<_> = (0..8).map(|r| g.space().unrank(r)).collect();
        for s in &all {
            for p in 0..3 {
                let expected: Vec<_> = all
                    .iter()
                    .filter(|t| (0..3).all(|q| q == p || t.0[q] == s.0[q]))
                    .cloned()
                    .collect();
                let got = g.adjacent_profiles(&UtilityIndex::new(p, s.clone())).unwrap();
                assert_eq!(got.len(), 2);
                assert_eq!(got, expected);
            }
        }
    }

    #[test]
    fn invalid_index_rejected() {
        let g = counterexample();
        assert!(g.adjacent_profiles(&UtilityIndex::new(2, vec![0, 0])).is_err());
        assert!(g.pure_regret(&UtilityIndex::new(0, vec![2, 0])).is_err());
        assert!(g.pure_regret(&UtilityIndex::new(0, vec![0])).is_err());
    }

    #[test]
    fn counterexample_regret() {
        let g = counterexample();
        assert_eq!(g.pure_regret(&UtilityIndex::new(0, vec![1, 0])).unwrap(), 1.0);
        assert_eq!(g.pure_regret(&UtilityIndex::new(0, vec![0, 0])).unwrap(), 0.0);
        assert_eq!(g.pure_regret(&UtilityIndex::new(1, vec![1, 0])).unwrap(), 0.0);
    }

    #[test]
    fn matching_pennies_regrets() {
        let g = matching_pennies();
        let uniform = MixedProfile::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(g.mixed_regret(&uniform, 0).unwrap(), 0.0);
        assert_eq!(g.mixed_regret(&uniform, 1).unwrap(), 0.0);
        for r in 0..4 {
            assert!(g.game_regret_pure(&g.space().unrank(r)).unwrap() > 0.0);
        }
        assert!(g.epsilon_pure_nash_set(0.0).unwrap().is_empty());
        assert_eq!(g.epsilon_pure_nash_set(2.0).unwrap().len(), 4);
    }

    #[test]
    fn prisoners_dilemma_defect_is_nash() {
        let g = prisoners_dilemma();
        assert_eq!(g.game_regret_pure(&PureProfile(vec![1, 1])).unwrap(), 0.0);
        assert_eq!(g.epsilon_pure_nash_set(0.0).unwrap(), vec![PureProfile(vec![1, 1])]);
    }

    #[test]
    fn mixed_regret_by_exhaustive_weighting() {
        let g = NormalFormGame::new(vec![2, 2], vec![3.0, 1.0, 0.0, 2.0, 5.0, -1.0, 1.0, 4.0])
            .unwrap();
        let x = [0.3, 0.7];
        let y = [0.5, 0.5];
        let m = MixedProfile::new(vec![x.to_vec(), y.to_vec()]).unwrap();
        let u = |p: usize, i: usize, j: usize| g.utility(p, i * 2 + j);
        let ev0: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| x[i] * y[j] * u(0, i, j)).sum();
        let dev0 = (0..2).map(|i| (0..2).map(|j| y[j] * u(0, i, j)).sum::<f64>()).fold(f64::MIN, f64::max);
        let ev1: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| x[i] * y[j] * u(1, i, j)).sum();
        let dev1 = (0..2).map(|j| (0..2).map(|i| x[i] * u(1, i, j)).sum::<f64>()).fold(f64::MIN, f64::max);
        assert!((g.mixed_regret(&m, 0).unwrap() - (dev0 - ev0)).abs() < 1e-12);
        assert!((g.mixed_regret(&m, 1).unwrap() - (dev1 - ev1)).abs() < 1e-12);
        assert!((g.game_regret_mixed(&m).unwrap() - (dev0 - ev0).max(dev1 - ev1)).abs() < 1e-12);
    }

    #[test]
    fn point_mass_mixed_regret_equals_pure() {
        let g = prisoners_dilemma();
        for r in 0..4 {
            let s = g.space().unrank(r);
            let m = MixedProfile::point_mass(g.space(), &s).unwrap();
            for p in 0..2 {
                assert_eq!(g.mixed_regret(&m, p).unwrap(), g.regret_at(p, r));
            }
        }
    }

    #[test]
    fn mixed_profile_validation() {
        assert!(MixedProfile::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(MixedProfile::new(vec![vec![-0.1, 1.1]]).is_err());
        assert!(MixedProfile::new(vec![vec![0.5, 0.5 + 5e-10]]).is_ok());
        let g = counterexample();
        let wrong = MixedProfile::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(g.mixed_regret(&wrong, 0).is_err());
    }

    #[test]
    fn negative_eps_rejected() {
        assert!(counterexample().epsilon_pure_nash_set(-0.1).is_err());
        assert!(counterexample().epsilon_pure_nash_set(f64::NAN).is_err());
    }

    #[test]
    fn empirical_counterexample_set() {
        // Final empirical game from the regret-pruning counterexample.
        let g = NormalFormGame::new(vec![2, 1], vec![1.8, 0.0, 1.45, 0.0]).unwrap();
        let set = g.epsilon_pure_nash_set(0.4).unwrap();
        assert_eq!(set, vec![PureProfile(vec![0, 0]), PureProfile(vec![1, 0])]);
        assert!((g.regret_at(0, 1) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NormalFormGame::new(vec![], vec![]).is_err());
        assert!(NormalFormGame::new(vec![2, 0], vec![]).is_err());
        assert!(NormalFormGame::new(vec![2, 2], vec![0.0; 7]).is_err());
        assert!(NormalFormGame::new(vec![1], vec![f64::NAN]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = NormalFormGame::new(vec![2, 3], (0..12).map(|i| (i as f64).sqrt() * 0.1 - 0.3).collect())
            .unwrap();
        let back = NormalFormGame::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        assert!(NormalFormGame::from_json(r#"{"players":3,"actions":[1,1],"utilities":[0,0]}"#).is_err());
    }
}
