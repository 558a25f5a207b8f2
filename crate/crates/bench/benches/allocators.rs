use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nomanet_bench::{fixture_instance, fixture_model};
use nomanet_core::baselines::{brute_force_oracle, sca_solve, ScaConfig};
use nomanet_core::model::Variant;
use nomanet_core::noma::SystemConfig;
use nomanet_core::training::{loss_and_grads, TrainConfig};

fn bench_forward(c: &mut Criterion) {
    let sys = SystemConfig::default();
    let inst = fixture_instance(10, 5);
    let mut group = c.benchmark_group("forward_10x5");
    for variant in [Variant::Plain, Variant::Residual, Variant::Dense] {
        let model = fixture_model(variant);
        group.bench_function(variant.as_str(), |b| {
            b.iter(|| black_box(model.allocate(black_box(&inst), sys.p_max).unwrap()))
        });
    }
    group.finish();
}

fn bench_loss_backward(c: &mut Criterion) {
    let inst = fixture_instance(10, 5);
    let model = fixture_model(Variant::Residual);
    let cfg = TrainConfig::default();
    c.bench_function("loss_and_grads_res_10x5", |b| {
        b.iter(|| black_box(loss_and_grads(&model, black_box(&inst), &cfg).unwrap()))
    });
}

fn bench_solvers(c: &mut Criterion) {
    let sys = SystemConfig::default();
    let sca_cfg = ScaConfig::default();
    let big = fixture_instance(10, 5);
    let mut group = c.benchmark_group("solvers");
    group.sample_size(10);
    group.bench_function("sca_10x5", |b| {
        b.iter(|| black_box(sca_solve(black_box(&big), &sys, &sca_cfg)))
    });
    let tiny = fixture_instance(1, 2);
    group.bench_function("oracle_1x2_step_p200", |b| {
        b.iter(|| black_box(brute_force_oracle(black_box(&tiny), &sys, sys.p_max / 200.0).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_forward, bench_loss_backward, bench_solvers);
criterion_main!(benches);
