//! Query-complexity experiments on random zero-sum games.
//!
//! Rows are computed in parallel and written in (ε, algorithm, run) order.
//! Every run draws from its own seed so any single cell can be rerun alone.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{verify_run, RunVerification};
use crate::bounds::BoundBudget;
use crate::error::{config, Error, Result};
use crate::exec::{self, Execution};
use crate::game::NormalFormGame;
use crate::psp::{
    build_geometric_schedule, build_hybrid_schedule, run_psp_exec, PruneReason, PrunerConfig, RunReport,
    SamplingSchedule, Strategy, Termination, DEFAULT_BETA,
};
use crate::simulation::{make_beta_noise, make_random_zero_sum, SimulatorSpec, DEFAULT_NOISE_AMPLITUDE};

pub const SWEEP_HEADER: [&str; 12] = [
    "eps",
    "algo",
    "gamma_star",
    "run",
    "seed",
    "profile_queries",
    "index_queries",
    "we_pruned",
    "regret_pruned",
    "terminated_by",
    "containment_ok",
    "wall_ms",
];

pub const RATIO_HEADER: [&str; 8] =
    ["eps", "algo", "gamma_star", "run", "seed", "profile_queries", "we_profile_queries", "ratio"];

/// γ* given outright or as a multiple of ε (`ps-reg+:2eps`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSpec {
    Absolute(f64),
    EpsMultiple(f64),
}

impl GammaSpec {
    pub fn resolve(self, epsilon: f64) -> f64 {
        match self {
            GammaSpec::Absolute(g) => g,
            GammaSpec::EpsMultiple(k) => k * epsilon,
        }
    }
}

/// An algorithm as listed on the command line, before ε is known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoSpec {
    /// Template strategy; its γ* is replaced by `gamma` on resolution.
    pub strategy: Strategy,
    pub gamma: Option<GammaSpec>,
}

impl AlgoSpec {
    pub fn fixed(strategy: Strategy) -> Self {
        Self { strategy, gamma: strategy.gamma_star().map(GammaSpec::Absolute) }
    }

    pub fn eps_multiple(strategy: Strategy, k: f64) -> Self {
        Self { strategy, gamma: Some(GammaSpec::EpsMultiple(k)) }
    }

    pub fn resolve(&self, epsilon: f64) -> Strategy {
        let g = self.gamma.map(|g| g.resolve(epsilon));
        match (self.strategy, g) {
            (Strategy::PsReg { .. }, Some(gamma_star)) => Strategy::PsReg { gamma_star },
            (Strategy::PsRegPlus { .. }, Some(gamma_star)) => Strategy::PsRegPlus { gamma_star },
            (s, _) => s,
        }
    }
}

impl fmt::Display for AlgoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gamma {
            Some(GammaSpec::EpsMultiple(k)) => write!(f, "{}:{k}eps", self.strategy.family()),
            _ => write!(f, "{}", self.strategy),
        }
    }
}

impl FromStr for AlgoSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some((name, param)) = s.split_once(':') {
            if let Some(k) = param.trim().strip_suffix("eps") {
                let k = if k.is_empty() { Ok(1.0) } else { k.parse::<f64>() }
                    .map_err(|_| Error::Config(format!("bad gamma multiple in {s:?}")))?;
                if !(k >= 0.0 && k.is_finite()) {
                    return config(format!("gamma multiple must be non-negative in {s:?}"));
                }
                let strategy: Strategy = format!("{name}:0").parse()?;
                return Ok(Self::eps_multiple(strategy, k));
            }
        }
        Ok(Self::fixed(s.parse()?))
    }
}

pub fn parse_algos(s: &str) -> Result<Vec<AlgoSpec>> {
    let algos: Vec<AlgoSpec> = s.split(',').filter(|x| !x.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if algos.is_empty() {
        return config("no algorithms given");
    }
    Ok(algos)
}

/// Parses `--eps`: a comma list of numbers or `c/K` terms, where any term
/// may be a sweep `c/K..c/L` (every integer divisor from K to L).
pub fn parse_epsilons(s: &str, c: f64) -> Result<Vec<f64>> {
    let divisor = |t: &str| -> Result<u32> {
        let d = t
            .trim()
            .strip_prefix("c/")
            .ok_or_else(|| Error::Config(format!("expected c/K, got {t:?}")))?
            .parse::<u32>()
            .map_err(|_| Error::Config(format!("bad divisor in {t:?}")))?;
        if d == 0 {
            return config("divisor must be positive");
        }
        Ok(d)
    };
    let mut out = Vec::new();
    for term in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = term.split_once("..") {
            let (lo, hi) = (divisor(a)?, divisor(b)?);
            if lo > hi {
                return config(format!("empty sweep {term:?}"));
            }
            out.extend((lo..=hi).map(|k| c / f64::from(k)));
        } else if term.starts_with("c/") {
            out.push(c / f64::from(divisor(term)?));
        } else {
            out.push(term.parse::<f64>().map_err(|_| Error::Config(format!("bad epsilon {term:?}")))?);
        }
    }
    if out.is_empty() {
        return config("no target errors given");
    }
    if let Some(e) = out.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return config(format!("target errors must be positive, got {e}"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    /// Geometric for PS-WE, hybrid for regret-pruning algorithms.
    #[default]
    ByAlgorithm,
    Geometric,
    Hybrid,
}

impl FromStr for ScheduleChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "by-algorithm" => Ok(Self::ByAlgorithm),
            "geometric" => Ok(Self::Geometric),
            "hybrid" => Ok(Self::Hybrid),
            _ => config(format!("unknown schedule {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub actions: usize,
    pub range: (f64, f64),
    pub amplitude: f64,
    pub delta: f64,
    pub epsilons: Vec<f64>,
    pub algorithms: Vec<AlgoSpec>,
    pub runs: usize,
    pub seed: u64,
    pub beta: f64,
    pub schedule: ScheduleChoice,
    pub verify: bool,
    /// Mixed profiles sampled per verified run.
    pub mixed_profiles: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            actions: 10,
            range: (-2.0, 2.0),
            amplitude: DEFAULT_NOISE_AMPLITUDE,
            delta: 0.05,
            epsilons: vec![1.2],
            algorithms: vec![AlgoSpec::fixed(Strategy::PsWe)],
            runs: 10,
            seed: 0,
            beta: DEFAULT_BETA,
            schedule: ScheduleChoice::ByAlgorithm,
            verify: false,
            mixed_profiles: 50,
        }
    }
}

impl ExperimentConfig {
    /// Range width of every sample: (hi − lo) + 2·amplitude.
    pub fn c(&self) -> f64 {
        self.range.1 - self.range.0 + 2.0 * self.amplitude
    }

    pub fn validate(&self) -> Result<()> {
        if self.actions == 0 {
            return config("actions must be positive");
        }
        let (lo, hi) = self.range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return config(format!("utility range [{lo}, {hi}] is empty"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return config("noise amplitude must be non-negative");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return config(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return config("target errors must be positive");
        }
        if self.algorithms.is_empty() {
            return config("no algorithms given");
        }
        if self.runs == 0 {
            return config("runs must be at least 1");
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return config(format!("beta must exceed 1, got {}", self.beta));
        }
        Ok(())
    }

    /// Random zero-sum game and the standard beta noise, both derived from `seed`.
    pub fn make_spec(&self, game_seed: u64) -> Result<SimulatorSpec> {
        let (lo, hi) = self.range;
        let game = make_random_zero_sum(self.actions, lo, hi, game_seed)?;
        let noise = make_beta_noise(&game, self.amplitude, game_seed);
        SimulatorSpec::with_declared_range(game, noise, lo, hi, game_seed)
    }

    pub fn schedule_for(&self, strategy: Strategy, epsilon: f64, num_indices: usize) -> Result<(SamplingSchedule, BoundBudget)> {
        let budget = BoundBudget::new(self.c(), num_indices, 1, self.delta)?;
        let hybrid = match self.schedule {
            ScheduleChoice::ByAlgorithm => strategy.uses_regret_pruning(),
            ScheduleChoice::Geometric => false,
            ScheduleChoice::Hybrid => true,
        };
        let schedule = if hybrid {
            build_hybrid_schedule(&budget, epsilon, self.beta)?
        } else {
            build_geometric_schedule(&budget, epsilon, self.beta)?
        };
        let budget = schedule.budget(budget);
        Ok((schedule, budget))
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one cell, from the master seed and the cell coordinates.
pub fn cell_seed(master: u64, eps_index: usize, algo_id: u64, run: usize) -> u64 {
    [eps_index as u64, algo_id, run as u64].iter().fold(mix(master), |h, &x| mix(h ^ x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub eps: f64,
    pub algo: Strategy,
    pub run: usize,
    pub seed: u64,
    pub profile_queries: u64,
    pub index_queries: u64,
    pub we_pruned: usize,
    pub regret_pruned: usize,
    pub terminated_by: Termination,
    pub containment_ok: Option<bool>,
    pub wall_ms: f64,
}

/// Everything produced by one run, for callers that need more than the row.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub row: RunRow,
    pub report: RunReport,
    pub verification: Option<RunVerification>,
}

fn run_cell(
    cfg: &ExperimentConfig,
    spec: &SimulatorSpec,
    strategy: Strategy,
    eps: f64,
    run: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let sim = spec.reseeded(seed);
    let (schedule, budget) = cfg.schedule_for(strategy, eps, sim.truth().space().num_indices())?;
    let report = run_psp_exec(&sim, &schedule, &budget, PrunerConfig::new(strategy, eps)?, Execution::Sequential)?;
    let verification = if cfg.verify {
        Some(verify_run(sim.truth(), &report, cfg.mixed_profiles, mix(seed))?)
    } else {
        None
    };
    let row = RunRow {
        eps,
        algo: strategy,
        run,
        seed,
        profile_queries: report.profile_queries,
        index_queries: report.index_queries,
        we_pruned: report.count_pruned(PruneReason::WellEstimated),
        regret_pruned: report.count_pruned(PruneReason::Regret),
        terminated_by: report.terminated_by,
        containment_ok: verification.as_ref().map(|v| v.ok),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutcome { row, report, verification })
}

/// All (ε, algorithm, run) cells on one game generated from the master seed.
pub fn run_sweep_outcomes(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    run_sweep_on(cfg, &cfg.make_spec(cfg.seed)?, exec)
}

/// The sweep on a given game and noise model; only the sampling seed varies.
pub fn run_sweep_on(cfg: &ExperimentConfig, spec: &SimulatorSpec, exec: Execution) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let spec = spec.clone();
    let cells: Vec<(usize, usize, usize)> = (0..cfg.epsilons.len())
        .flat_map(|e| (0..cfg.algorithms.len()).flat_map(move |a| (0..cfg.runs).map(move |r| (e, a, r))))
        .collect();
    exec::map_indexed(exec, cells.len(), |i| {
        let (e, a, r) = cells[i];
        let eps = cfg.epsilons[e];
        let strategy = cfg.algorithms[a].resolve(eps);
        run_cell(cfg, &spec, strategy, eps, r, cell_seed(cfg.seed, e, strategy.id(), r))
    })
    .into_iter()
    .collect()
}

pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<RunRow>> {
    Ok(run_sweep_outcomes(cfg, exec)?.into_iter().map(|o| o.row).collect())
}

/// Per-algorithm ratio of profile queries to PS-WE on the same game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub eps: f64,
    pub algo: Strategy,
    pub run: usize,
    pub seed: u64,
    pub profile_queries: u64,
    pub we_profile_queries: u64,
    pub ratio: f64,
}

/// One fresh game per (ε, run); every algorithm, plus PS-WE as the
/// reference, runs on that game with the same sampling seed.
pub fn run_ratio_study(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<RatioRow>> {
    cfg.validate()?;
    let mut algos: Vec<AlgoSpec> = vec![AlgoSpec::fixed(Strategy::PsWe)];
    algos.extend(cfg.algorithms.iter().filter(|a| a.strategy != Strategy::PsWe).copied());
    let games: Vec<(usize, usize)> =
        (0..cfg.epsilons.len()).flat_map(|e| (0..cfg.runs).map(move |r| (e, r))).collect();
    let per_game: Vec<Result<Vec<RatioRow>>> = exec::map_indexed(exec, games.len(), |i| {
        let (e, r) = games[i];
        let eps = cfg.epsilons[e];
        let seed = cell_seed(cfg.seed, e, u64::MAX, r);
        let spec = cfg.make_spec(seed)?;
        let queries: Vec<(Strategy, u64)> = algos
            .iter()
            .map(|a| {
                let strategy = a.resolve(eps);
                Ok((strategy, run_cell(cfg, &spec, strategy, eps, r, seed)?.row.profile_queries))
            })
            .collect::<Result<_>>()?;
        let we = queries[0].1;
        Ok(queries
            .into_iter()
            .map(|(algo, q)| RatioRow {
                eps,
                algo,
                run: r,
                seed,
                profile_queries: q,
                we_profile_queries: we,
                ratio: q as f64 / we as f64,
            })
            .collect())
    });
    let mut rows = Vec::new();
    for g in per_game {
        rows.extend(g?);
    }
    // Group by (ε, algorithm, run) to match the sweep's ordering.
    let order = |row: &RatioRow| {
        let e = cfg.epsilons.iter().position(|&x| x == row.eps).unwrap_or(usize::MAX);
        let a = algos.iter().position(|x| x.resolve(row.eps) == row.algo).unwrap_or(usize::MAX);
        (e, a, row.run)
    };
    rows.sort_by_key(order);
    Ok(rows)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn gamma_field(s: &Strategy) -> String {
    s.gamma_star().map(|g| g.to_string()).unwrap_or_default()
}

/// Consecutive rows sharing (ε, algorithm).
fn groups<T>(rows: &[T], key: impl Fn(&T) -> (f64, Strategy)) -> Vec<&[T]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || key(&rows[i]) != key(&rows[start]) {
            if start < i {
                out.push(&rows[start..i]);
            }
            start = i;
        }
    }
    out
}

pub fn write_sweep_csv<W: Write>(rows: &[RunRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for group in groups(rows, |r| (r.eps, r.algo)) {
        for r in group {
            w.write_record([
                r.eps.to_string(),
                r.algo.family().to_string(),
                gamma_field(&r.algo),
                r.run.to_string(),
                r.seed.to_string(),
                r.profile_queries.to_string(),
                r.index_queries.to_string(),
                r.we_pruned.to_string(),
                r.regret_pruned.to_string(),
                r.terminated_by.as_str().to_string(),
                r.containment_ok.map(|b| b.to_string()).unwrap_or_default(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        let first = &group[0];
        let col = |f: &dyn Fn(&RunRow) -> f64| mean_stdev(&group.iter().map(f).collect::<Vec<_>>());
        let stats = [
            col(&|r| r.profile_queries as f64),
            col(&|r| r.index_queries as f64),
            col(&|r| r.we_pruned as f64),
            col(&|r| r.regret_pruned as f64),
            col(&|r| f64::from(u8::from(r.terminated_by == Termination::AllPruned))),
            col(&|r| f64::from(u8::from(r.containment_ok == Some(true)))),
            col(&|r| r.wall_ms),
        ];
        let verified = group.iter().all(|r| r.containment_ok.is_some());
        for (label, pick) in [("mean", 0usize), ("stdev", 1)] {
            let v = |i: usize| {
                let (m, s) = stats[i];
                if pick == 0 { m } else { s }
            };
            w.write_record([
                first.eps.to_string(),
                first.algo.family().to_string(),
                gamma_field(&first.algo),
                label.to_string(),
                String::new(),
                v(0).to_string(),
                v(1).to_string(),
                v(2).to_string(),
                v(3).to_string(),
                v(4).to_string(),
                if verified { v(5).to_string() } else { String::new() },
                format!("{:.3}", v(6)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ratio_csv<W: Write>(rows: &[RatioRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATIO_HEADER)?;
    for group in groups(rows, |r| (r.eps, r.algo)) {
        for r in group {
            w.write_record([
                r.eps.to_string(),
                r.algo.family().to_string(),
                gamma_field(&r.algo),
                r.run.to_string(),
                r.seed.to_string(),
                r.profile_queries.to_string(),
                r.we_profile_queries.to_string(),
                r.ratio.to_string(),
            ])?;
        }
        let first = &group[0];
        let q = mean_stdev(&group.iter().map(|r| r.profile_queries as f64).collect::<Vec<_>>());
        let we = mean_stdev(&group.iter().map(|r| r.we_profile_queries as f64).collect::<Vec<_>>());
        let ratio = mean_stdev(&group.iter().map(|r| r.ratio).collect::<Vec<_>>());
        for (label, m) in [("mean", true), ("stdev", false)] {
            let pick = |(a, b): (f64, f64)| if m { a } else { b };
            w.write_record([
                first.eps.to_string(),
                first.algo.family().to_string(),
                gamma_field(&first.algo),
                label.to_string(),
                String::new(),
                pick(q).to_string(),
                pick(we).to_string(),
                pick(ratio).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per verified run.
pub fn write_verdicts_jsonl<W: Write>(outcomes: &[RunOutcome], mut out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        eps: f64,
        algo: String,
        run: usize,
        seed: u64,
        verification: &'a RunVerification,
    }
    for o in outcomes {
        if let Some(v) = &o.verification {
            let line = Line { eps: o.row.eps, algo: o.row.algo.to_string(), run: o.row.run, seed: o.row.seed, verification: v };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Means of a column per (ε, algorithm), in row order.
pub fn mean_by_cell(rows: &[RunRow], f: impl Fn(&RunRow) -> f64) -> Vec<(f64, Strategy, f64)> {
    groups(rows, |r| (r.eps, r.algo))
        .into_iter()
        .map(|g| (g[0].eps, g[0].algo, mean_stdev(&g.iter().map(&f).collect::<Vec<_>>()).0))
        .collect()
}

/// A loaded game with fresh noise drawn from `seed`.
pub fn spec_for_game(game: NormalFormGame, cfg: &ExperimentConfig, seed: u64) -> Result<SimulatorSpec> {
    let noise = make_beta_noise(&game, cfg.amplitude, seed);
    SimulatorSpec::with_declared_range(game, noise, cfg.range.0, cfg.range.1, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_syntax() {
        let e = parse_epsilons("c/10..c/12, 0.5,c/2", 24.0).unwrap();
        assert_eq!(e, vec![2.4, 24.0 / 11.0, 2.0, 0.5, 12.0]);
        assert!(parse_epsilons("c/0", 24.0).is_err());
        assert!(parse_epsilons("c/5..c/3", 24.0).is_err());
        assert!(parse_epsilons("-1", 24.0).is_err());
        assert!(parse_epsilons("", 24.0).is_err());
    }

    #[test]
    fn algo_syntax() {
        let a = parse_algos("ps-we,ps-reg+:2eps,ps-reg:0.3,ps-reg-m").unwrap();
        assert_eq!(a[1].resolve(0.5), Strategy::PsRegPlus { gamma_star: 1.0 });
        assert_eq!(a[2].resolve(0.5), Strategy::PsReg { gamma_star: 0.3 });
        assert_eq!(a[1].to_string(), "ps-reg+:2eps");
        assert!(parse_algos("ps-we:eps").is_err());
    }

    #[test]
    fn seeds_are_distinct_per_cell() {
        let mut seen = std::collections::HashSet::new();
        for e in 0..4 {
            for a in 0..5 {
                for r in 0..10 {
                    assert!(seen.insert(cell_seed(7, e, a, r)));
                }
            }
        }
        assert_eq!(cell_seed(7, 1, 2, 3), cell_seed(7, 1, 2, 3));
    }

    #[test]
    fn stats() {
        let (m, s) = mean_stdev(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_stdev(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig { delta: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { runs: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(ExperimentConfig::default().c(), 24.0);
    }
}
