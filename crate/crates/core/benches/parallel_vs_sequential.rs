use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use reid_core::eval::{run_on_views, ExperimentConfig};
use reid_core::matcher::{score_matrix_with, MatchOptions};
use reid_core::synth::{gen_cross_view, SynthParams};
use reid_core::xqda::{covariance_with, train, XqdaOptions};
use reid_core::{Exec, NormalizationAxis};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn scoring(c: &mut Criterion) {
    let s = gen_cross_view(&SynthParams { n_ids: 600, dim: 128, view_noise: 0.3, seed: 1, ..Default::default() }).unwrap();
    let model = train(&s.view_a, &s.view_b, 1, 0, &XqdaOptions::default()).unwrap();
    let mut group = c.benchmark_group("score_matrix_600x600_d128");
    for (name, exec) in MODES {
        let opts = MatchOptions { exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| score_matrix_with(&model, &s.view_a, &s.view_b, &opts).unwrap())
        });
    }
    group.finish();
}

fn covariances(c: &mut Criterion) {
    let s = gen_cross_view(&SynthParams { n_ids: 2000, dim: 256, seed: 2, ..Default::default() }).unwrap();
    let x = s.view_a.vectors();
    let mut group = c.benchmark_group("covariance_256x2000");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| covariance_with(x, exec).unwrap()));
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let s = gen_cross_view(&SynthParams { n_ids: 316, dim: 64, view_noise: 0.5, seed: 3, ..Default::default() }).unwrap();
    let cfg = ExperimentConfig { normalization_axis: NormalizationAxis::TwoSided, ..Default::default() };
    let mut group = c.benchmark_group("ten_fold_eval_316_ids");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_on_views("bench", &s.view_a, &s.view_b, None, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, covariances, experiment);
criterion_main!(benches);
