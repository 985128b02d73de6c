mod common;

use common::{check_cvae_gradients, check_mlp_mse_gradients};
use genforge_core::cvae::{standard_normal_matrix, CvaeConfig, CvaeModel, Reconstruction};
use genforge_core::nn::{init_network, Activation, AdamConfig, AdamState, GradientBundle, Matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    standard_normal_matrix(rows, cols, &mut rng)
}

#[test]
fn mlp_forward_matches_dot_product_oracle() {
    let net = init_network(
        &[5, 128, 1],
        &[Activation::Relu, Activation::Identity],
        2024,
    )
    .unwrap();
    let x = random_matrix(3, 5, 1);
    let got = net.predict(&x).unwrap();
    let (l0, l1) = (&net.layers()[0], &net.layers()[1]);
    for r in 0..3 {
        let mut out = l1.biases()[0];
        for h in 0..128 {
            let mut pre = l0.biases()[h];
            for i in 0..5 {
                pre += l0.weights().get(h, i) * x.get(r, i);
            }
            out += l1.weights().get(0, h) * pre.max(0.0);
        }
        assert!((got.get(r, 0) - out).abs() < 1e-12);
    }
}

#[test]
fn mlp_mse_gradients_match_finite_differences() {
    let acts = [Activation::Relu, Activation::Relu, Activation::Identity];
    for seed in 0..5 {
        let net = init_network(&[4, 7, 6, 3], &acts, seed).unwrap();
        let x = random_matrix(5, 4, 100 + seed);
        let t = random_matrix(5, 3, 200 + seed);
        let check = check_mlp_mse_gradients(&net, &x, &t);
        assert!(check.checked > 0);
        assert!(
            check.max_relative_error < 1e-5,
            "seed {seed}: max relative error {}",
            check.max_relative_error
        );
    }
}

#[test]
fn elbo_gradients_match_finite_differences() {
    for (seed, reconstruction) in [
        (1, Reconstruction::SumOverFeatures),
        (2, Reconstruction::MeanOverElements),
    ] {
        let config = CvaeConfig {
            input_dim: 5,
            latent_dim: 3,
            hidden: vec![9, 7],
            seed,
            ..CvaeConfig::default()
        };
        let model = CvaeModel::new(&config).unwrap();
        let x = random_matrix(6, 5, seed + 10);
        let c = random_matrix(6, 1, seed + 20);
        let eps = random_matrix(6, 3, seed + 30);
        let check = check_cvae_gradients(&model, &x, &c, 0.8, reconstruction, &eps);
        assert!(check.checked > 0);
        assert!(
            check.max_relative_error < 1e-4,
            "{}",
            check.max_relative_error
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shapes_are_preserved(
        dims in prop::collection::vec(1usize..=16, 2..=5),
        batch in 1usize..=8,
        seed in any::<u64>(),
    ) {
        let mut acts = vec![Activation::Relu; dims.len() - 2];
        acts.push(Activation::Identity);
        let mut net = init_network(&dims, &acts, seed).unwrap();
        let x = random_matrix(batch, dims[0], seed);
        let cache = net.forward(&x).unwrap();
        prop_assert_eq!(cache.output().shape(), (batch, *dims.last().unwrap()));
        let g = random_matrix(batch, *dims.last().unwrap(), seed ^ 1);
        let (grads, dx) = net.backward(&cache, &g).unwrap();
        prop_assert!(grads.is_congruent_with(&net));
        prop_assert_eq!(dx.shape(), x.shape());
        let mut opt = AdamState::for_network(&net, AdamConfig::default());
        let before = net.dims();
        opt.step_network(&mut net, &grads).unwrap();
        prop_assert_eq!(net.dims(), before);
        prop_assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn adam_zero_gradient_is_a_fixed_point(dims in prop::collection::vec(1usize..=8, 2..=4), seed in any::<u64>()) {
        let mut acts = vec![Activation::Relu; dims.len() - 2];
        acts.push(Activation::Identity);
        let mut net = init_network(&dims, &acts, seed).unwrap();
        let before = net.clone();
        let zero = GradientBundle::zeros_like(&net);
        let mut opt = AdamState::for_network(&net, AdamConfig::default());
        for _ in 0..3 {
            opt.step_network(&mut net, &zero).unwrap();
        }
        prop_assert_eq!(net, before);
    }
}
