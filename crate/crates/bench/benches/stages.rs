use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use chromaforest::features::assemble_features;
use chromaforest::propagate::{compute_weights, place_scribbles, propagate_chroma, SolverOptions};
use chromaforest::segment::{meanshift_segment, MeanShiftParams};
use chromaforest::superpixel::extract_superpixels;
use chromaforest::{colorize, train_model, PipelineConfig};
use chromaforest_bench::{gray_scene, scene};

fn small_config() -> PipelineConfig {
    PipelineConfig {
        clusters: 8,
        trees: 30,
        ..PipelineConfig::default()
    }
}

fn superpixels(c: &mut Criterion) {
    let mut group = c.benchmark_group("superpixels");
    for side in [64, 128] {
        let gray = gray_scene(side, side);
        group.bench_with_input(BenchmarkId::from_parameter(side), &gray, |b, g| {
            b.iter(|| extract_superpixels(black_box(g), 40).unwrap())
        });
    }
    group.finish();
}

fn features(c: &mut Criterion) {
    let gray = gray_scene(96, 96);
    let sp = extract_superpixels(&gray, 40).unwrap();
    c.bench_function("features/96", |b| {
        b.iter(|| assemble_features(black_box(&gray), &sp).unwrap())
    });
}

fn segmentation(c: &mut Criterion) {
    let gray = gray_scene(96, 96);
    let params = MeanShiftParams::default();
    c.bench_function("meanshift/96", |b| {
        b.iter(|| meanshift_segment(black_box(&gray), &params).unwrap())
    });
}

fn forest(c: &mut Criterion) {
    let cfg = small_config();
    let model = train_model(&[scene(96, 96)], &cfg).unwrap();
    let gray = gray_scene(96, 96);
    let sp = extract_superpixels(&gray, 40).unwrap();
    let feats = model.features(&gray, &sp).unwrap();
    c.bench_function("forest/predict", |b| {
        b.iter(|| {
            feats
                .iter()
                .map(|f| model.forest.predict_label(&f[..]))
                .sum::<usize>()
        })
    });
    c.bench_function("forest/train", |b| {
        b.iter(|| train_model(&[scene(64, 64)], black_box(&cfg)).unwrap())
    });
}

fn propagation(c: &mut Criterion) {
    let cfg = small_config();
    let model = train_model(&[scene(96, 96)], &cfg).unwrap();
    let mut group = c.benchmark_group("propagate");
    for side in [64, 128] {
        let gray = gray_scene(side, side);
        let sp = extract_superpixels(&gray, 40).unwrap();
        let labels: Vec<usize> = (0..sp.len()).map(|i| i % model.palette.k()).collect();
        let scribbles = place_scribbles(&sp, &labels, &model.palette, &gray).unwrap();
        let stencil = compute_weights(&gray).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| {
                propagate_chroma(&stencil, black_box(&scribbles), &SolverOptions::default())
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let cfg = small_config();
    let model = train_model(&[scene(96, 96)], &cfg).unwrap();
    let gray = gray_scene(128, 128);
    let mut group = c.benchmark_group("colorize");
    group.sample_size(10);
    group.bench_function("128", |b| {
        b.iter(|| colorize(black_box(&gray), &model, &cfg, None).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    superpixels,
    features,
    segmentation,
    forest,
    propagation,
    end_to_end
);
criterion_main!(benches);
