//! Noisy simulators over a hidden game.
//!
//! Every utility index owns an independent counter-based random stream
//! (ChaCha8 keyed by the master seed, stream id = flat index, word position =
//! draw counter / 32), so the k-th draw at an index is the same no matter how
//! other indices were sampled or how many threads were involved.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::game::{NormalFormGame, PureProfile, StrategySpace};

/// Noise amplitude used in the experiments: samples are u ± 10ν.
pub const DEFAULT_NOISE_AMPLITUDE: f64 = 10.0;
/// Shape parameters of the variance-modifier distribution.
pub const DEFAULT_BETA_SHAPE: (f64, f64) = (1.5, 3.0);

/// Anything that yields bounded, unbiased utility samples per index.
pub trait Simulator: Sync {
    fn space(&self) -> &StrategySpace;

    /// c = sup over profiles of (b_s − a_s).
    fn range_width(&self) -> f64;

    /// Writes draws `first_draw .. first_draw + out.len()` of the stream of
    /// index (`player`, `rank`) into `out`.
    fn fill(&self, player: usize, rank: usize, first_draw: u64, out: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    ScaledBernoulli,
}

/// Per-index two-point noise ±amplitude·ν with equal probability.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    amplitude: f64,
    nu: Vec<f64>,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, amplitude: 0.0, nu: Vec::new() }
    }

    pub fn scaled_bernoulli(amplitude: f64, nu: Vec<f64>) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return invalid(format!("noise amplitude must be finite and non-negative, got {amplitude}"));
        }
        if let Some(bad) = nu.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("variance modifier {bad} outside [0, 1]"));
        }
        Ok(Self { kind: NoiseKind::ScaledBernoulli, amplitude, nu })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::ScaledBernoulli => self.amplitude,
        }
    }

    pub fn variance_modifiers(&self) -> &[f64] {
        &self.nu
    }

    /// Half-width of the two-point noise at a flat index.
    pub fn magnitude(&self, flat: usize) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::ScaledBernoulli => self.amplitude * self.nu[flat],
        }
    }

    /// Exact noise variance (amplitude·ν)² at a flat index.
    pub fn variance(&self, flat: usize) -> f64 {
        self.magnitude(flat).powi(2)
    }
}

/// Persisted noise model: `{ "kind", "amplitude", "nu", "seed" }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFile {
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub nu: Vec<f64>,
    pub seed: u64,
}

impl NoiseFile {
    pub fn new(noise: &NoiseModel, seed: u64) -> Self {
        Self { kind: noise.kind, amplitude: noise.amplitude(), nu: noise.nu.clone(), seed }
    }

    pub fn into_model(self) -> Result<NoiseModel> {
        match self.kind {
            NoiseKind::None => Ok(NoiseModel::none()),
            NoiseKind::ScaledBernoulli => NoiseModel::scaled_bernoulli(self.amplitude, self.nu),
        }
    }
}

/// A hidden game plus noise, per-profile sample ranges, and a master seed.
#[derive(Clone, Debug)]
pub struct SimulatorSpec {
    truth: NormalFormGame,
    noise: NoiseModel,
    ranges: Vec<(f64, f64)>,
    c: f64,
    master_seed: u64,
}

impl SimulatorSpec {
    /// Uses the hull [min u − amplitude, max u + amplitude] for every profile.
    pub fn new(truth: NormalFormGame, noise: NoiseModel, master_seed: u64) -> Result<Self> {
        let amp = noise.amplitude();
        let hull = (truth.min_utility() - amp, truth.max_utility() + amp);
        let ranges = vec![hull; truth.space().num_profiles()];
        Self::with_ranges(truth, noise, ranges, master_seed)
    }

    /// Declares the truth range [lo, hi] explicitly, widened by the amplitude.
    /// With lo = −2, hi = 2 and amplitude 10 this gives c = 24.
    pub fn with_declared_range(
        truth: NormalFormGame,
        noise: NoiseModel,
        lo: f64,
        hi: f64,
        master_seed: u64,
    ) -> Result<Self> {
        let amp = noise.amplitude();
        let ranges = vec![(lo - amp, hi + amp); truth.space().num_profiles()];
        Self::with_ranges(truth, noise, ranges, master_seed)
    }

    pub fn with_ranges(
        truth: NormalFormGame,
        noise: NoiseModel,
        ranges: Vec<(f64, f64)>,
        master_seed: u64,
    ) -> Result<Self> {
        let space = truth.space();
        if ranges.len() != space.num_profiles() {
            return invalid("one sample range per profile is required");
        }
        if noise.kind == NoiseKind::ScaledBernoulli && noise.nu.len() != space.num_indices() {
            return invalid(format!(
                "noise model has {} variance modifiers, game has {} indices",
                noise.nu.len(),
                space.num_indices()
            ));
        }
        let n = space.num_players();
        for (rank, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo <= hi) {
                return invalid(format!("profile {rank} has an empty range [{lo}, {hi}]"));
            }
            for p in 0..n {
                let u = truth.utility(p, rank);
                let half = noise.magnitude(space.flat_index(p, rank));
                if u - half < lo || u + half > hi {
                    return invalid(format!(
                        "samples of index ({p}, {rank}) can leave the declared range [{lo}, {hi}]"
                    ));
                }
            }
        }
        let c = ranges.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
        Ok(Self { truth, noise, ranges, c, master_seed })
    }

    pub fn truth(&self) -> &NormalFormGame {
        &self.truth
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn range(&self, rank: usize) -> (f64, f64) {
        self.ranges[rank]
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Same game and noise with a different sampling seed.
    pub fn reseeded(&self, master_seed: u64) -> Self {
        Self { master_seed, ..self.clone() }
    }

    /// Exact noise variance at (player, rank).
    pub fn true_variance(&self, player: usize, rank: usize) -> f64 {
        self.noise.variance(self.truth.space().flat_index(player, rank))
    }

    /// Draws `count` samples at `profile` for each player in `active`,
    /// continuing each index's stream from its ledger count.
    pub fn sample(
        &self,
        profile: &PureProfile,
        active: &[usize],
        count: usize,
        ledger: &mut QueryLedger,
    ) -> Result<Vec<Vec<f64>>> {
        if active.is_empty() {
            return invalid("at least one active player is required");
        }
        if count == 0 {
            return invalid("sample count must be positive");
        }
        let space = self.truth.space();
        let rank = space.rank(profile)?;
        if let Some(&p) = active.iter().find(|&&p| p >= space.num_players()) {
            return invalid(format!("player {p} out of range"));
        }
        if ledger.index_counts.len() != space.num_indices() {
            return invalid("ledger does not match the game");
        }
        let mut out = Vec::with_capacity(active.len());
        for &p in active {
            let flat = space.flat_index(p, rank);
            let mut draws = vec![0.0; count];
            self.fill(p, rank, ledger.index_counts[flat], &mut draws);
            ledger.index_counts[flat] += count as u64;
            out.push(draws);
        }
        ledger.profile_queries += count as u64;
        Ok(out)
    }
}

impl Simulator for SimulatorSpec {
    fn space(&self) -> &StrategySpace {
        self.truth.space()
    }

    fn range_width(&self) -> f64 {
        self.c
    }

    fn fill(&self, player: usize, rank: usize, first_draw: u64, out: &mut [f64]) {
        let u = self.truth.utility(player, rank);
        let flat = self.truth.space().flat_index(player, rank);
        let half = self.noise.magnitude(flat);
        if half == 0.0 {
            out.fill(u);
            return;
        }
        let (hi, lo) = (u + half, u - half);
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(flat as u64);
        rng.set_word_pos(u128::from(first_draw / 32));
        let skip = (first_draw % 32) as u32;
        let mut word = rng.next_u32() >> skip;
        let mut left = 32 - skip;
        for x in out.iter_mut() {
            if left == 0 {
                word = rng.next_u32();
                left = 32;
            }
            *x = if word & 1 == 1 { hi } else { lo };
            word >>= 1;
            left -= 1;
        }
    }
}

/// Simulator query accounting.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    /// One per (profile, sample) invocation with at least one active player.
    pub profile_queries: u64,
    /// Samples drawn per utility index (flat layout).
    pub index_counts: Vec<u64>,
}

impl QueryLedger {
    pub fn new(space: &StrategySpace) -> Self {
        Self { profile_queries: 0, index_counts: vec![0; space.num_indices()] }
    }

    /// Total per-(player, profile) samples.
    pub fn index_queries(&self) -> u64 {
        self.index_counts.iter().sum()
    }
}

/// Two-player zero-sum game with u_1 i.i.d. uniform on [lo, hi].
pub fn make_random_zero_sum(actions: usize, lo: f64, hi: f64, seed: u64) -> Result<NormalFormGame> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return invalid(format!("utility range [{lo}, {hi}] is empty"));
    }
    if actions == 0 {
        return invalid("actions must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(lo, hi).expect("range checked above");
    let mut utilities = Vec::with_capacity(2 * actions * actions);
    for _ in 0..actions * actions {
        let u: f64 = dist.sample(&mut rng);
        utilities.push(u);
        utilities.push(-u);
    }
    NormalFormGame::new(vec![actions, actions], utilities)
}

/// ν ~ Beta(1.5, 3) per index, amplitude 10.
pub fn make_standard_noise(game: &NormalFormGame, seed: u64) -> NoiseModel {
    make_beta_noise(game, DEFAULT_NOISE_AMPLITUDE, seed)
}

/// ν ~ Beta(1.5, 3) per index with the given amplitude.
pub fn make_beta_noise(game: &NormalFormGame, amplitude: f64, seed: u64) -> NoiseModel {
    let (a, b) = DEFAULT_BETA_SHAPE;
    let beta = Beta::new(a, b).expect("valid beta parameters");
    // Offset keeps the ν stream distinct from a game generated with the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let nu = (0..game.space().num_indices()).map(|_| rng.sample(beta).clamp(0.0, 1.0)).collect();
    NoiseModel::scaled_bernoulli(amplitude.max(0.0), nu).expect("beta draws lie in [0, 1]")
}
