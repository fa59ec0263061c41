use std::hint::black_box;

use collapse_core::concavify::conc_curve;
use collapse_core::diagnostics::hit_scan;
use collapse_core::value::Family;
use collapse_core::{Exec, Tolerances};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

#[path = "../tests/common/mod.rs"]
mod common;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn envelope_curve(c: &mut Criterion) {
    let mut group = c.benchmark_group("conc_curve");
    group.sample_size(10);
    for resolution in [101u32, 401] {
        let sc = common::random_scenario(&mut common::rng(3), resolution);
        let table = sc.benchmark(&Family::History).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, resolution), &table, |b, t| {
                b.iter(|| conc_curve(black_box(t), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("hit_scan");
    group.sample_size(10);
    let tol = Tolerances::default();
    // Pick a scenario with plenty of candidates above the posterior benchmark.
    let sc = (0..)
        .map(|seed| common::random_scenario(&mut common::rng(seed), 401))
        .find(|sc| hit_scan(sc, 0.0, &tol, Exec::Sequential).unwrap().len() > 20)
        .unwrap();
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| hit_scan(black_box(&sc), 0.0, &tol, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, envelope_curve, scan);
criterion_main!(benches);
