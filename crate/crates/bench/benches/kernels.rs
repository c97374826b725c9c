use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use ozevt_core::evt::{conditional_density, conditional_quantile, gpd_cdf, gpd_quantile};
use ozevt_core::inference::log_likelihood;
use ozevt_core::rfm::evaluate_rfm_field;
use ozevt_core::synth::{generate_synthetic, SyntheticConfig};
use ozevt_core::{GpdParams, PerturbationVector};

fn gpd(c: &mut Criterion) {
    let g = GpdParams::new(80.0, 5.0, 0.1).unwrap();
    c.bench_function("gpd quantile+cdf", |b| {
        b.iter(|| {
            let q = gpd_quantile(black_box(0.97), &g).unwrap();
            gpd_cdf(black_box(q), &g)
        })
    });
}

fn model(c: &mut Criterion) {
    let cfg = SyntheticConfig::desk(0.1);
    let (field, data, truth) = generate_synthetic(&cfg, 1).unwrap();
    let params = truth.state.site_params(&cfg.spec, 0);
    c.bench_function("conditional density", |b| {
        b.iter(|| conditional_density(black_box(71.0), black_box(63.0), &params))
    });
    c.bench_function("conditional quantile", |b| {
        b.iter(|| conditional_quantile(black_box(0.99), black_box(63.0), &params).unwrap())
    });
    let alpha = PerturbationVector::new(cfg.alpha.clone()).unwrap();
    c.bench_function("rfm field 400 cells x 92 days", |b| {
        b.iter(|| evaluate_rfm_field(&field, black_box(&alpha)).unwrap())
    });
    c.bench_function("log likelihood 50 sites x 92 days", |b| {
        b.iter(|| log_likelihood(&cfg.spec, black_box(&truth.state), &data, &field).unwrap())
    });
}

criterion_group!(benches, gpd, model);
criterion_main!(benches);
