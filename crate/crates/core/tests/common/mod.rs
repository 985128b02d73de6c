#![allow(dead_code)]

use genforge_core::cvae::{
    elbo_loss_with_noise, reparameterize_with_noise, CvaeModel, Reconstruction, LOG_VAR_LIMIT,
};
use genforge_core::nn::{Matrix, Mlp};

/// Central-difference step used by every gradient check.
pub const FD_STEP: f64 = 1e-6;

/// Gradients smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Signs of every ReLU pre-activation in a forward pass.
pub fn relu_pattern(net: &Mlp, input: &Matrix) -> Vec<bool> {
    let cache = net.forward(input).unwrap();
    cache
        .pre_activations()
        .iter()
        .zip(net.layers())
        .filter(|(_, l)| l.activation() == genforge_core::nn::Activation::Relu)
        .flat_map(|(pre, _)| pre.as_slice().iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}

/// Every non-smooth switch in the CVAE objective: ReLU signs and log-variance clamp regions.
pub fn cvae_pattern(model: &CvaeModel, x: &Matrix, c: &Matrix, eps: &Matrix) -> Vec<bool> {
    let d = model.latent_dim();
    let enc_in = x.hstack(c).unwrap();
    let mut pattern = relu_pattern(model.encoder(), &enc_in);
    let out = model.encoder().predict(&enc_in).unwrap();
    let (mu, raw) = out.split_cols(d).unwrap();
    pattern.extend(raw.as_slice().iter().map(|v| v.abs() <= LOG_VAR_LIMIT));
    let lv = raw.map(|v| v.clamp(-LOG_VAR_LIMIT, LOG_VAR_LIMIT));
    let s = reparameterize_with_noise(&mu, &lv, eps).unwrap();
    pattern.extend(relu_pattern(model.decoder(), &s.z.hstack(c).unwrap()));
    pattern
}

pub struct GradCheck {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_relative_error: f64,
    /// Analytic and numeric values at the worst parameter.
    pub worst_pair: (f64, f64),
}

/// Central-difference stencils.
#[derive(Clone, Copy, Debug)]
pub enum Stencil {
    /// `(f(h) - f(-h)) / 2h`
    TwoPoint { step: f64 },
    /// `(8(f(h) - f(-h)) - (f(2h) - f(-2h))) / 12h`, fourth order, far less round-off at a
    /// wider step.
    FourPoint { step: f64 },
}

impl Stencil {
    fn offsets(self) -> Vec<(f64, f64)> {
        match self {
            Stencil::TwoPoint { step } => {
                vec![(step, 1.0 / (2.0 * step)), (-step, -1.0 / (2.0 * step))]
            }
            Stencil::FourPoint { step } => {
                let w = 1.0 / (12.0 * step);
                vec![
                    (step, 8.0 * w),
                    (-step, -8.0 * w),
                    (2.0 * step, -w),
                    (-2.0 * step, w),
                ]
            }
        }
    }
}

/// Compares every CVAE parameter gradient with a central difference at frozen noise.
pub fn check_cvae_gradients(
    model: &CvaeModel,
    x: &Matrix,
    c: &Matrix,
    beta: f64,
    reconstruction: Reconstruction,
    eps: &Matrix,
) -> GradCheck {
    check_cvae_gradients_with(
        model,
        x,
        c,
        beta,
        reconstruction,
        eps,
        Stencil::TwoPoint { step: FD_STEP },
    )
}

/// As [`check_cvae_gradients`] with a chosen stencil. Parameters whose stencil crosses a ReLU
/// kink or the log-variance clamp are skipped.
pub fn check_cvae_gradients_with(
    model: &CvaeModel,
    x: &Matrix,
    c: &Matrix,
    beta: f64,
    reconstruction: Reconstruction,
    eps: &Matrix,
    stencil: Stencil,
) -> GradCheck {
    let (_, grads) = elbo_loss_with_noise(model, x, c, beta, reconstruction, eps).unwrap();
    let analytic = [grads.encoder.flatten(), grads.decoder.flatten()];
    let base_pattern = cvae_pattern(model, x, c, eps);
    let loss = |m: &CvaeModel| {
        elbo_loss_with_noise(m, x, c, beta, reconstruction, eps)
            .unwrap()
            .0
            .total
    };
    let mut result = GradCheck {
        checked: 0,
        skipped_kinks: 0,
        max_relative_error: 0.0,
        worst_pair: (0.0, 0.0),
    };
    for (net_idx, grads) in analytic.iter().enumerate() {
        let mut flat = 0;
        let tensor_lens: Vec<usize> = if net_idx == 0 {
            model
                .encoder()
                .param_slices()
                .iter()
                .map(|s| s.len())
                .collect()
        } else {
            model
                .decoder()
                .param_slices()
                .iter()
                .map(|s| s.len())
                .collect()
        };
        for (t, &len) in tensor_lens.iter().enumerate() {
            for i in 0..len {
                let perturbed = |delta: f64| {
                    let mut m = model.clone();
                    let mut enc = m.encoder().clone();
                    let mut dec = m.decoder().clone();
                    let net = if net_idx == 0 { &mut enc } else { &mut dec };
                    net.param_slices_mut()[t][i] += delta;
                    m = CvaeModel::from_parts(enc, dec, m.latent_dim(), m.condition_dim()).unwrap();
                    m
                };
                let points: Vec<(CvaeModel, f64)> = stencil
                    .offsets()
                    .into_iter()
                    .map(|(delta, weight)| (perturbed(delta), weight))
                    .collect();
                if points
                    .iter()
                    .any(|(m, _)| cvae_pattern(m, x, c, eps) != base_pattern)
                {
                    result.skipped_kinks += 1;
                    flat += 1;
                    continue;
                }
                let numeric: f64 = points.iter().map(|(m, w)| w * loss(m)).sum();
                let err = relative_error(grads[flat], numeric);
                if err > result.max_relative_error {
                    result.max_relative_error = err;
                    result.worst_pair = (grads[flat], numeric);
                }
                result.checked += 1;
                flat += 1;
            }
        }
    }
    result
}

/// Compares MLP parameter and input gradients of an MSE loss with central differences.
pub fn check_mlp_mse_gradients(net: &Mlp, x: &Matrix, target: &Matrix) -> GradCheck {
    let loss = |n: &Mlp, x: &Matrix| {
        genforge_core::nn::mse_loss(&n.predict(x).unwrap(), target)
            .unwrap()
            .0
    };
    let cache = net.forward(x).unwrap();
    let (_, out_grad) = genforge_core::nn::mse_loss(cache.output(), target).unwrap();
    let (grads, input_grad) = net.backward(&cache, &out_grad).unwrap();
    let base = relu_pattern(net, x);
    let mut result = GradCheck {
        checked: 0,
        skipped_kinks: 0,
        max_relative_error: 0.0,
        worst_pair: (0.0, 0.0),
    };
    let analytic = grads.flatten();
    let lens: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
    let mut flat = 0;
    for (t, &len) in lens.iter().enumerate() {
        for i in 0..len {
            let mut plus = net.clone();
            plus.param_slices_mut()[t][i] += FD_STEP;
            let mut minus = net.clone();
            minus.param_slices_mut()[t][i] -= FD_STEP;
            if relu_pattern(&plus, x) != base || relu_pattern(&minus, x) != base {
                result.skipped_kinks += 1;
            } else {
                let numeric = (loss(&plus, x) - loss(&minus, x)) / (2.0 * FD_STEP);
                let err = relative_error(analytic[flat], numeric);
                result.max_relative_error = result.max_relative_error.max(err);
                result.checked += 1;
            }
            flat += 1;
        }
    }
    for i in 0..x.as_slice().len() {
        let mut xp = x.clone();
        xp.as_mut_slice()[i] += FD_STEP;
        let mut xm = x.clone();
        xm.as_mut_slice()[i] -= FD_STEP;
        if relu_pattern(net, &xp) != base || relu_pattern(net, &xm) != base {
            result.skipped_kinks += 1;
            continue;
        }
        let numeric = (loss(net, &xp) - loss(net, &xm)) / (2.0 * FD_STEP);
        let err = relative_error(input_grad.as_slice()[i], numeric);
        result.max_relative_error = result.max_relative_error.max(err);
        result.checked += 1;
    }
    result
}
