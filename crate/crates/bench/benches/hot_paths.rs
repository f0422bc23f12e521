use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use xmsd_core::align::{partition_batch, soft_alignment};
use xmsd_core::dataset::{generate_synthetic, SyntheticSpec};
use xmsd_core::eval::{evaluate, DistanceKind};
use xmsd_core::objective::{composite_loss, LossConfig, StepContext};
use xmsd_core::{Matrix, TowerSpec, TwoTowerModel};

fn filled(rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|i| ((i * 7919) % 1000) as f64 / 500.0 - 1.0).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn desk() -> (TwoTowerModel, xmsd_core::PairedBatch) {
    let data = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let spec = |input| TowerSpec::new(input, 10).with_hidden(vec![256; 3]);
    let model = TwoTowerModel::init(spec(128), spec(1024), 1).unwrap();
    (model, data.pairs)
}

fn matmul(c: &mut Criterion) {
    let a = filled(64, 1024);
    let b = filled(1024, 256);
    c.bench_function("matmul 64x1024x256", |bench| bench.iter(|| black_box(&a).matmul(black_box(&b))));
}

fn composite_step(c: &mut Criterion) {
    let (mut model, pairs) = desk();
    let idx: Vec<usize> = (0..64).map(|i| i * 6).collect();
    let batch = pairs.select(&idx);
    let plan = partition_batch(64, 0.6, 3).unwrap();
    let cfg = LossConfig::default();
    let ctx = StepContext { n_classes: 10, dropout_seed: 5 };
    c.bench_function("composite step, batch 64", |bench| {
        bench.iter(|| {
            let out = composite_loss(&mut model, &batch, &plan, &cfg, &ctx).unwrap();
            model.clear_cache();
            black_box(out.breakdown.total)
        })
    });
}

fn soft_align(c: &mut Criterion) {
    let (model, pairs) = desk();
    let batch = pairs.select(&(0..64).collect::<Vec<_>>());
    let emb = model.encode(&batch.audio, &batch.visual).unwrap();
    c.bench_function("soft alignment, batch 64", |bench| {
        bench.iter(|| soft_alignment(black_box(&emb), 1.0).unwrap())
    });
}

fn retrieval(c: &mut Criterion) {
    let (model, pairs) = desk();
    c.bench_function("evaluate 400 pairs", |bench| {
        bench.iter(|| evaluate(&model, black_box(&pairs), DistanceKind::Normalized).unwrap().map_avg)
    });
}

criterion_group!(benches, matmul, composite_step, soft_align, retrieval);
criterion_main!(benches);
