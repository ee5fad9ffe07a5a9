use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ltmix::augment::{bilateral_mix, MixupConfig};
use ltmix::model::{record_dbn_loss, temperatures, DualBranchModel, ModelConfig};
use ltmix::numerics::{forward_linear, sgd_step, Graph, SgdConfig};
use ltmix::rng::{self, Stream};
use ltmix::sampling::{RebalancedSampler, RebalancedSamplerConfig, UniformSampler};
use ltmix_bench::{longtail_gaussian, random_matrix};

fn bench_linear(c: &mut Criterion) {
    let x = random_matrix(128, 64, 1);
    let w = random_matrix(64, 64, 2);
    let b = random_matrix(1, 64, 3);
    let b = ltmix::Tensor::new(vec![64], b.into_data()).unwrap();
    c.bench_function("forward_linear_128x64x64", |bench| {
        bench.iter(|| forward_linear(black_box(&x), black_box(&w), black_box(&b)).unwrap())
    });
}

fn bench_samplers(c: &mut Criterion) {
    let data = longtail_gaussian();
    let mut g = c.benchmark_group("samplers");
    g.bench_function("uniform_128", |bench| {
        let mut s = UniformSampler::new(data.len(), rng::stream(0, Stream::UniformSampler)).unwrap();
        bench.iter(|| s.draw(black_box(128)))
    });
    g.bench_function("rebalanced_128", |bench| {
        let mut s = RebalancedSampler::new(
            &data,
            &RebalancedSamplerConfig::default(),
            rng::stream(0, Stream::RebalancedSampler),
        )
        .unwrap();
        bench.iter(|| s.draw(black_box(128)))
    });
    g.finish();
}

fn bench_train_step(c: &mut Criterion) {
    let data = longtail_gaussian();
    let mut model = DualBranchModel::new(
        ModelConfig::mlp(data.dim(), data.num_classes()),
        &mut rng::stream(0, Stream::Init),
    )
    .unwrap();
    let schedule = temperatures(3.0, 0.6, data.class_counts()).unwrap();
    let mut us = UniformSampler::new(data.len(), rng::stream(0, Stream::UniformSampler)).unwrap();
    let mut rs = RebalancedSampler::new(
        &data,
        &RebalancedSamplerConfig::default(),
        rng::stream(0, Stream::RebalancedSampler),
    )
    .unwrap();
    let mut mix_rng = rng::stream(0, Stream::Mixup);
    let sgd = SgdConfig::default();
    let mixup = MixupConfig::default();
    c.bench_function("dbn_mix_step_b128", |bench| {
        bench.iter(|| {
            let uc = data.batch(&us.draw(128)).unwrap();
            let rb = data.batch(&rs.draw(128)).unwrap();
            let mixed = bilateral_mix(&uc, &rb, &mixup, &mut mix_rng).unwrap();
            let mut graph = Graph::new();
            let loss = record_dbn_loss(
                &mut graph,
                &model,
                &mixed.conventional.features,
                &mixed.conventional.labels,
                &mixed.rebalancing.features,
                &mixed.rebalancing.labels,
                &schedule,
            )
            .unwrap();
            model.params_mut().zero_grad();
            graph.backward(loss, model.params_mut()).unwrap();
            sgd_step(model.params_mut(), &sgd, 0);
        })
    });
}

criterion_group!(benches, bench_linear, bench_samplers, bench_train_step);
criterion_main!(benches);
