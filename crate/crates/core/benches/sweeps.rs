use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use avsup_core::dynamics::VehicleParams;
use avsup_core::lateral::LqrWeights;
use avsup_core::sim::reference_scenario;
use avsup_core::sweep::{gain_table, gain_table_sequential, linspace, sweep_periods, sweep_periods_sequential};

fn periods(c: &mut Criterion) {
    let base = reference_scenario(0.5);
    let grid = [0.05, 0.1, 0.2, 0.25, 0.5, 1.0, 1.5, 2.0];
    let mut g = c.benchmark_group("period_sweep");
    g.sample_size(10);
    g.bench_function("sequential", |b| {
        b.iter(|| sweep_periods_sequential(black_box(&base), &grid))
    });
    g.bench_function("parallel", |b| b.iter(|| sweep_periods(black_box(&base), &grid)));
    g.finish();
}

fn gains(c: &mut Criterion) {
    let speeds = linspace(0.5, 30.0, 120);
    let p = VehicleParams::sedan();
    let w = LqrWeights::lateral_tracking();
    let mut g = c.benchmark_group("gain_table");
    g.sample_size(20);
    g.bench_function("sequential", |b| {
        b.iter(|| gain_table_sequential(black_box(&speeds), &p, &w))
    });
    g.bench_function("parallel", |b| b.iter(|| gain_table(black_box(&speeds), &p, &w)));
    g.finish();
}

criterion_group!(benches, periods, gains);
criterion_main!(benches);
