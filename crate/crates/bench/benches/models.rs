use std::hint::black_box;

use celltide_core::arima;
use celltide_core::dataset::{gen_synthetic, make_windows};
use celltide_core::linalg::{matmul, Matrix};
use celltide_core::train::{fit_model, TrainConfig};
use celltide_core::{FfnnParams, LstmParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn window(t: usize) -> Vec<f64> {
    (0..t).map(|i| 0.5 + 0.4 * (i as f64 * 0.7).sin()).collect()
}

fn lstm(c: &mut Criterion) {
    let mut g = c.benchmark_group("lstm");
    for hidden in [8, 50] {
        let p = LstmParams::init(hidden, 1, 1).unwrap();
        let w = window(12);
        g.bench_with_input(BenchmarkId::new("forward_t12", hidden), &hidden, |b, _| {
            b.iter(|| p.predict(black_box(&w)).unwrap())
        });
        let (y, cache) = p.forward(&w).unwrap();
        let mut grads = p.zeros_like();
        g.bench_with_input(BenchmarkId::new("backward_t12", hidden), &hidden, |b, _| {
            b.iter(|| p.backward_acc(black_box(&cache), y - 0.3, &mut grads).unwrap())
        });
    }
    g.finish();
}

fn ffnn(c: &mut Criterion) {
    let p = FfnnParams::init(12, 1).unwrap();
    let w = window(12);
    c.bench_function("ffnn/forward_t12", |b| b.iter(|| p.predict(black_box(&w)).unwrap()));
    let (y, cache) = p.forward(&w).unwrap();
    c.bench_function("ffnn/backward_t12", |b| b.iter(|| p.backward(black_box(&cache), y - 0.3).unwrap()));
}

fn training_epoch(c: &mut Criterion) {
    let series = gen_synthetic(4, 3).unwrap();
    let scaled: Vec<f64> = series.values.iter().map(|v| v / 200.0).collect();
    let set = make_windows(&scaled, 12).unwrap();
    let cfg = TrainConfig { epochs: 1, hidden: 16, ..Default::default() };
    let mut g = c.benchmark_group("epoch_564_windows");
    g.sample_size(10);
    g.bench_function("lstm_h16", |b| {
        b.iter(|| {
            let mut p = LstmParams::init(16, 1, 0).unwrap();
            fit_model(&mut p, &set, &set, &cfg).unwrap()
        })
    });
    g.bench_function("ffnn", |b| {
        b.iter(|| {
            let mut p = FfnnParams::init(12, 0).unwrap();
            fit_model(&mut p, &set, &set, &cfg).unwrap()
        })
    });
    g.finish();
}

fn arima_fit(c: &mut Criterion) {
    let series = gen_synthetic(14, 5).unwrap().values;
    let mut g = c.benchmark_group("arima_fit_2016");
    g.sample_size(10);
    g.bench_function("(1,0,0)", |b| b.iter(|| arima::fit(black_box(&series), 1, 0, 0).unwrap()));
    g.bench_function("(2,1,2)", |b| b.iter(|| arima::fit(black_box(&series), 2, 1, 2).unwrap()));
    g.finish();
}

fn linalg(c: &mut Criterion) {
    let a = Matrix::from_fn(64, 64, |i, j| ((i * 7 + j) % 13) as f64 * 0.1);
    let b = Matrix::from_fn(64, 64, |i, j| ((i + j * 3) % 11) as f64 * 0.1);
    c.bench_function("matmul_64", |bch| bch.iter(|| matmul(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, lstm, ffnn, training_epoch, arima_fit, linalg);
criterion_main!(benches);
