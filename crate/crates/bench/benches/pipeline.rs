use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use genforge_core::cvae::{self, elbo_loss, CvaeConfig, CvaeModel};
use genforge_core::dataset::{compute_bounds, Standardizer};
use genforge_core::metrics::{check_validity, diversity};
use genforge_core::nn::{init_network, Activation, Matrix};
use genforge_core::sbo::{run_sbo, SboConfig};
use genforge_core::synthetic::airfoil_like;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn nn(c: &mut Criterion) {
    let net = init_network(
        &[5, 128, 128, 1],
        &[Activation::Relu, Activation::Relu, Activation::Identity],
        0,
    )
    .unwrap();
    let x = Matrix::filled(128, 5, 0.3);
    c.bench_function("mlp_forward_backward_b128", |b| {
        b.iter(|| {
            let cache = net.forward(black_box(&x)).unwrap();
            let grad = Matrix::filled(128, 1, 1.0);
            black_box(net.backward(&cache, &grad).unwrap())
        })
    });
}

fn cvae_bench(c: &mut Criterion) {
    let ds = airfoil_like(0);
    let std = Standardizer::fit(&ds).unwrap();
    let config = CvaeConfig::default();
    let model = CvaeModel::new(&config).unwrap();
    let (x, cond) = cvae::standardized_training_data(&ds, &std);
    let idx: Vec<usize> = (0..128).collect();
    let (xb, cb) = (x.select_rows(&idx), cond.select_rows(&idx));
    c.bench_function("elbo_loss_and_gradients_b128", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| {
            black_box(elbo_loss(&model, &xb, &cb, 1.0, config.reconstruction, &mut rng).unwrap())
        })
    });
    let one_epoch = CvaeConfig {
        epochs: 1,
        ..CvaeConfig::default()
    };
    let mut group = c.benchmark_group("cvae");
    group.sample_size(10);
    group.bench_function("train_one_epoch_1503_rows", |b| {
        b.iter_batched(
            || CvaeModel::new(&one_epoch).unwrap(),
            |mut m| black_box(cvae::train(&mut m, &ds, &std, &one_epoch).unwrap()),
            BatchSize::LargeInput,
        )
    });
    group.bench_function("generate_256", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        b.iter(|| black_box(cvae::generate(&model, &std, 115.0, 256, &mut rng).unwrap()))
    });
    group.finish();
}

fn sbo_and_metrics(c: &mut Criterion) {
    let ds = airfoil_like(0);
    let std = Standardizer::fit(&ds).unwrap();
    let bounds = compute_bounds(&ds, 0.05).unwrap();
    c.bench_function("sbo_default_budget", |b| {
        b.iter(|| black_box(run_sbo(&ds, &std, &SboConfig::default()).unwrap()))
    });
    let designs: Vec<_> = ds.designs().into_iter().take(256).collect();
    c.bench_function("validity_and_diversity_256", |b| {
        b.iter(|| {
            black_box(check_validity(&designs, &bounds));
            black_box(diversity(&designs).unwrap())
        })
    });
}

criterion_group!(benches, nn, cvae_bench, sbo_and_metrics);
criterion_main!(benches);
