use std::hint::black_box;

use coverage_core::coverage::{ActorBoxSpec, ActorMembership};
use coverage_core::pipeline::{actor_accumulators, mine_prepared, prepare, PipelineParams};
use coverage_core::synth::generate;
use coverage_core::synth::random::{random_script, RandomOptions};
use coverage_core::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_pipeline(c: &mut Criterion) {
    let o = RandomOptions {
        vehicles: 60,
        spread: 1500.0,
        duration: 30.0,
        ..Default::default()
    };
    let (r, _) = generate(&random_script(7, 1, &o)).unwrap();
    let params = PipelineParams::default();
    let boxes: Vec<ActorBoxSpec> = [10.0, 25.0, 50.0, 100.0]
        .iter()
        .map(|&f| ActorBoxSpec {
            long_front: f,
            long_rear: f,
            lat_halfwidth: 4.0,
        })
        .collect();

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_with_input(BenchmarkId::new("mine", name), &exec, |b, &exec| {
            b.iter(|| {
                let p = prepare(black_box(&r), &params, exec);
                mine_prepared(&p, &params, exec)
            })
        });
        let p = prepare(&r, &params, exec);
        let mined = mine_prepared(&p, &params, exec);
        group.bench_with_input(BenchmarkId::new("actor_boxes", name), &exec, |b, &exec| {
            b.iter(|| actor_accumulators(&p.views, &mined.scenarios, black_box(&boxes), ActorMembership::Main, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
