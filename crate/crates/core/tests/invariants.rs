use proptest::prelude::*;

use psprune::analysis::check_pure_containment;
use psprune::bounds::{BoundBudget, UtilityAccumulator};
use psprune::exec::Execution;
use psprune::experiment::ExperimentConfig;
use psprune::psp::{
    build_geometric_schedule, build_hybrid_schedule, run_psp_exec, PruneReason, PrunerConfig, RunReport,
    SamplingSchedule, Strategy, Termination, DEFAULT_BETA,
};
use psprune::simulation::{make_random_zero_sum, NoiseModel, QueryLedger, SimulatorSpec};
use psprune::{NormalFormGame, PureProfile, StrategySpace, UtilityIndex};

const REGRET_STRATEGIES: [Strategy; 5] = [
    Strategy::PsReg0,
    Strategy::PsReg { gamma_star: 0.5 },
    Strategy::PsRegPlus { gamma_star: 0.0 },
    Strategy::PsRegPlus { gamma_star: 0.5 },
    Strategy::PsRegM,
];

fn standard_run(actions: usize, strategy: Strategy, divisor: f64, seed: u64) -> (SimulatorSpec, RunReport) {
    let cfg = ExperimentConfig { actions, ..Default::default() };
    let eps = cfg.c() / divisor;
    let spec = cfg.make_spec(seed).unwrap();
    let (schedule, budget) = cfg.schedule_for(strategy, eps, spec.truth().space().num_indices()).unwrap();
    let report = run_psp_exec(&spec, &schedule, &budget, PrunerConfig::new(strategy, eps).unwrap(), Execution::Sequential)
        .unwrap();
    (spec, report)
}

#[test]
fn pruned_indices_are_frozen() {
    for strategy in REGRET_STRATEGIES.iter().copied().chain([Strategy::PsWe]) {
        let (_, report) = standard_run(6, strategy, 30.0, 21);
        let space = report.empirical.space().clone();
        for rec in &report.prune_records {
            let rank = space.rank(&rec.index.profile).unwrap();
            let p = rec.index.player;
            assert_eq!(rec.samples_at_prune, report.schedule.cumulative(rec.iteration));
            assert_eq!(report.empirical.count(p, rank), rec.samples_at_prune);
            assert_eq!(report.empirical.mean(p, rank), rec.frozen_mean);
        }
        let mut active = space.num_indices();
        for row in &report.trace {
            assert_eq!(row.active_before, active);
            assert_eq!(row.active_after, active - row.well_estimated_pruned - row.regret_pruned);
            active = row.active_after;
        }
        assert_eq!(report.terminated_by == Termination::AllPruned, report.prune_records.len() == space.num_indices());
    }
}

#[test]
fn regret_lower_bound_never_exceeds_regret() {
    for (i, strategy) in REGRET_STRATEGIES.iter().enumerate() {
        let (_, report) = standard_run(5, *strategy, 40.0, 30 + i as u64);
        let space = report.empirical.space().clone();
        for rank in 0..space.num_profiles() {
            for p in 0..2 {
                let idx = UtilityIndex::new(p, space.unrank(rank));
                let rlb = report.empirical.regret_lower_bound(&idx).unwrap();
                assert!(rlb <= report.empirical.empirical_pure_regret(&idx).unwrap());
            }
        }
    }
}

#[test]
fn no_regret_prune_while_every_bound_exceeds_half_range() {
    for (i, strategy) in REGRET_STRATEGIES.iter().enumerate() {
        for seed in 0..4 {
            let (spec, report) = standard_run(5, *strategy, 50.0, 100 * i as u64 + seed);
            for row in report.trace.iter().filter(|r| r.regret_pruned > 0) {
                assert!(row.min_bound.unwrap() <= spec.c() / 2.0, "{strategy} pruned at t={}", row.iteration);
            }
        }
    }
}

#[test]
fn noiseless_runs_never_prune_best_responses() {
    for seed in 0..5 {
        let truth = make_random_zero_sum(5, -2.0, 2.0, seed).unwrap();
        let spec = SimulatorSpec::new(truth.clone(), NoiseModel::none(), seed).unwrap();
        let eps = spec.c() / 40.0;
        for strategy in REGRET_STRATEGIES {
            let base = BoundBudget::new(spec.c(), truth.space().num_indices(), 1, 0.05).unwrap();
            let schedule = build_hybrid_schedule(&base, eps, DEFAULT_BETA).unwrap();
            let budget = schedule.budget(base);
            let report =
                run_psp_exec(&spec, &schedule, &budget, PrunerConfig::new(strategy, eps).unwrap(), Execution::Sequential)
                    .unwrap();
            for rec in report.prune_records.iter().filter(|r| r.reason == PruneReason::Regret) {
                assert!(truth.pure_regret(&rec.index).unwrap() > 0.0, "{strategy} pruned a best response");
            }
            assert_eq!(report.empirical.to_normal_form().unwrap(), truth);
        }
    }
}

#[test]
fn zero_noise_terminates_at_first_accurate_iteration() {
    let cfg = ExperimentConfig { actions: 4, amplitude: 0.0, ..Default::default() };
    let eps = cfg.c() / 20.0;
    let spec = cfg.make_spec(3).unwrap();
    for strategy in REGRET_STRATEGIES.iter().copied().chain([Strategy::PsWe]) {
        let (schedule, budget) = cfg.schedule_for(strategy, eps, spec.truth().space().num_indices()).unwrap();
        let first = (1..=schedule.len())
            .find(|&t| budget.combined(&UtilityAccumulator::from_parts(schedule.cumulative(t), 0.0, 0.0)) <= eps)
            .unwrap();
        let report =
            run_psp_exec(&spec, &schedule, &budget, PrunerConfig::new(strategy, eps).unwrap(), Execution::Sequential)
                .unwrap();
        assert_eq!(report.iterations_run, first, "{strategy}");
        assert_eq!(report.terminated_by, Termination::AllPruned);
    }
}

#[test]
fn ps_we_leaves_every_bound_within_epsilon() {
    for seed in 0..5 {
        let (_, report) = standard_run(6, Strategy::PsWe, 20.0, seed);
        assert_eq!(report.terminated_by, Termination::AllPruned);
        assert!(report.empirical.bounds().iter().all(|&b| b <= report.config.epsilon));
        assert_eq!(report.count_pruned(PruneReason::Regret), 0);
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let cfg = ExperimentConfig { actions: 8, ..Default::default() };
    let eps = cfg.c() / 30.0;
    let spec = cfg.make_spec(77).unwrap();
    for strategy in REGRET_STRATEGIES {
        let (schedule, budget) = cfg.schedule_for(strategy, eps, spec.truth().space().num_indices()).unwrap();
        let config = PrunerConfig::new(strategy, eps).unwrap();
        let a = run_psp_exec(&spec, &schedule, &budget, config, Execution::Sequential).unwrap();
        let b = run_psp_exec(&spec, &schedule, &budget, config, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn report_json_round_trip() {
    let (_, report) = standard_run(3, Strategy::PsRegM, 20.0, 4);
    let back: RunReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn schedules_reach_omega_and_fixed_point() {
    use psprune::analysis::check_omega_sufficiency;
    use psprune::psp::implied_length;
    for actions in [2usize, 5, 10, 20, 40] {
        let base = BoundBudget::new(24.0, 2 * actions * actions, 1, 0.05).unwrap();
        for k in [2.0, 10.0, 50.0, 100.0] {
            let eps = 24.0 / k;
            for s in [
                build_geometric_schedule(&base, eps, DEFAULT_BETA).unwrap(),
                build_hybrid_schedule(&base, eps, DEFAULT_BETA).unwrap(),
            ] {
                let budget = s.budget(base);
                assert!(check_omega_sufficiency(&s, &budget, eps));
                assert_eq!(implied_length(&base, eps, DEFAULT_BETA, s.kind(), s.len()), s.len());
            }
        }
    }
    let budget = BoundBudget::new(24.0, 50, 2, 0.05).unwrap();
    let short = SamplingSchedule::from_cumulative(vec![10, 20]).unwrap();
    assert!(!check_omega_sufficiency(&short, &budget, 2.4));
}

#[test]
fn bounds_cover_the_truth() {
    // δ' = 0.05 per evaluation; each bound should hold in ≥ 99% of trials.
    let truth = NormalFormGame::new(vec![1], vec![0.3]).unwrap();
    let noise = NoiseModel::scaled_bernoulli(10.0, vec![0.4]).unwrap();
    let spec = SimulatorSpec::with_declared_range(truth, noise, -2.0, 2.0, 11).unwrap();
    let budget = BoundBudget::new(spec.c(), 1, 1, 0.05).unwrap();
    let mut ledger = QueryLedger::new(spec.truth().space());
    let profile = PureProfile(vec![0]);
    let (mut h, mut eb, mut comb) = (0, 0, 0);
    let trials = 10_000;
    for t in 0..trials {
        let m = 2 + t % 40;
        let draws = spec.sample(&profile, &[0], m, &mut ledger).unwrap().remove(0);
        let acc = UtilityAccumulator::from_samples(&draws);
        let err = (acc.mean() - 0.3).abs();
        h += usize::from(err <= budget.hoeffding(m as u64));
        eb += usize::from(err <= budget.empirical_bennett(&acc));
        comb += usize::from(err <= budget.combined(&acc));
    }
    for hits in [h, eb, comb] {
        assert!(hits as f64 >= 0.99 * trials as f64, "{hits}/{trials}");
    }
}

#[test]
fn accumulator_matches_two_pass() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.random_range(-12.0..12.0) + 1e3).collect();
    let acc = UtilityAccumulator::from_samples(&xs);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!((acc.mean() - mean).abs() <= 1e-9 * mean.abs());
    assert!((acc.variance().unwrap() - var).abs() <= 1e-9 * var);
}

proptest! {
    #[test]
    fn merge_equals_sequential_push(xs in prop::collection::vec(-50.0f64..50.0, 0..60), split in 0usize..60) {
        let split = split.min(xs.len());
        let mut left = UtilityAccumulator::from_samples(&xs[..split]);
        left.merge(&UtilityAccumulator::from_samples(&xs[split..]));
        let whole = UtilityAccumulator::from_samples(&xs);
        prop_assert_eq!(left.count(), whole.count());
        prop_assert!((left.mean() - whole.mean()).abs() <= 1e-9 * (1.0 + whole.mean().abs()));
        prop_assert!((left.sum_sq_dev() - whole.sum_sq_dev()).abs() <= 1e-9 * (1.0 + whole.sum_sq_dev()));
    }

    #[test]
    fn rank_unrank_round_trip(counts in prop::collection::vec(1usize..5, 1..4), pick in 0usize..1000) {
        let space = StrategySpace::new(counts).unwrap();
        let rank = pick % space.num_profiles();
        prop_assert_eq!(space.rank(&space.unrank(rank)).unwrap(), rank);
    }

    #[test]
    fn containment_is_monotone_in_slack(seed in 0u64..500, gamma in 0.0f64..2.0, slack in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let u = make_random_zero_sum(3, -2.0, 2.0, seed).unwrap();
        let u_hat = make_random_zero_sum(3, -2.0, 2.0, seed + 1).unwrap();
        if check_pure_containment(&u, &u_hat, gamma, slack).holds {
            prop_assert!(check_pure_containment(&u, &u_hat, gamma, slack + extra).holds);
        }
    }

    #[test]
    fn empirical_regret_matches_game_regret(seed in 0u64..200) {
        let (_, report) = standard_run(3, Strategy::PsWe, 5.0, seed);
        let means = report.empirical.to_normal_form().unwrap();
        for rank in 0..9 {
            for p in 0..2 {
                let idx = UtilityIndex::new(p, means.space().unrank(rank));
                prop_assert_eq!(report.empirical.empirical_pure_regret(&idx).unwrap(), means.pure_regret(&idx).unwrap());
            }
        }
    }
}
