use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use psprune::exec::Execution;
use psprune::experiment::ExperimentConfig;
use psprune::psp::{run_psp_exec, PrunerConfig, Strategy};

fn bench_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_psp");
    group.sample_size(10);
    for actions in [10usize, 20] {
        let cfg = ExperimentConfig { actions, ..Default::default() };
        let eps = cfg.c() / 20.0;
        let spec = cfg.make_spec(1).unwrap();
        for strategy in [Strategy::PsWe, Strategy::PsRegM] {
            let (schedule, budget) = cfg.schedule_for(strategy, eps, spec.truth().space().num_indices()).unwrap();
            let config = PrunerConfig::new(strategy, eps).unwrap();
            for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
                let id = BenchmarkId::new(format!("{}/{label}", strategy.family()), actions);
                group.bench_with_input(id, &exec, |b, &exec| {
                    b.iter(|| run_psp_exec(&spec, &schedule, &budget, config, exec).unwrap())
                });
            }
        }
    }
    group.finish();
}

criterion_group!(benches, bench_run);
criterion_main!(benches);
