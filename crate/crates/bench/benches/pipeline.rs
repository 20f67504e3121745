use criterion::{criterion_group, criterion_main, Criterion};
use volint_bench::{iid_series, minute_series};
use volint_core::intervals::{extract_intervals, scaled_pdf};
use volint_core::kstest::{ks_matrix, CvCounts};
use volint_core::moments::{interval_grid, q_grid};
use volint_core::volatility::preprocess;

fn volatility(c: &mut Criterion) {
    let ms = minute_series(140_000);
    let mut group = c.benchmark_group("volatility");
    group.sample_size(10);
    group.bench_function("preprocess/140k", |b| b.iter(|| preprocess(&ms, true)));
    group.finish();
}

fn intervals(c: &mut Criterion) {
    let v = iid_series(140_000);
    c.bench_function("extract_intervals/140k", |b| {
        b.iter(|| extract_intervals(&v, 2.0, true))
    });
    let s = extract_intervals(&v, 2.0, true).unwrap();
    c.bench_function("scaled_pdf", |b| b.iter(|| scaled_pdf(&s, 20)));

    let samples: Vec<_> = [2.0, 3.0, 4.0, 5.0]
        .iter()
        .map(|&q| extract_intervals(&v, q, true).unwrap())
        .collect();
    c.bench_function("ks_matrix/4", |b| {
        b.iter(|| ks_matrix(&samples, CvCounts::Overlap))
    });

    let grid = q_grid(1.0, 5.0, 0.1);
    let mut group = c.benchmark_group("moments");
    group.sample_size(10);
    group.bench_function("interval_grid/41", |b| b.iter(|| interval_grid(&v, &grid, true)));
    group.finish();
}

criterion_group!(benches, volatility, intervals);
criterion_main!(benches);
