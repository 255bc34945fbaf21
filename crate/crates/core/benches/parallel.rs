use boundary_lab::config::RunConfig;
use boundary_lab::experiments::{run, Experiment};
use boundary_lab::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn config() -> RunConfig {
    RunConfig {
        shadow_r_max: 6.0,
        cocycle_trials: 2000,
        bms_trials: 200,
        gap_samples: 200,
        tube_pairs: 2,
        ergodic_pairs: 8,
        t_grid: vec![25.0, 50.0],
        ..RunConfig::default()
    }
}

fn modes(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("exec");
    group.sample_size(10);
    for e in [Experiment::Shadow, Experiment::Cocycle, Experiment::Ergodic] {
        for (label, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
            group.bench_with_input(BenchmarkId::new(e.name(), label), &exec, |b, &exec| {
                b.iter(|| run(e, &cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, modes);
criterion_main!(benches);
