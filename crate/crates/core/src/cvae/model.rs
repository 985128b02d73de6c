use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{init_network, Activation, GradientBundle, Matrix, Mlp};

/// Encoder log-variances are clamped to `[-LOG_VAR_LIMIT, LOG_VAR_LIMIT]` before use.
pub const LOG_VAR_LIMIT: f64 = 10.0;

/// How the squared reconstruction error is reduced to a scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Sum over features, mean over the batch: the unit-variance Gaussian negative
    /// log-likelihood up to a constant factor and offset.
    #[default]
    SumOverFeatures,
    /// Mean over every element.
    MeanOverElements,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub condition_dim: usize,
    pub hidden: Vec<usize>,
    pub beta: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub reconstruction: Reconstruction,
    pub seed: u64,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        Self {
            input_dim: 5,
            latent_dim: 8,
            condition_dim: 1,
            hidden: vec![128, 128],
            beta: 1.0,
            epochs: 400,
            learning_rate: 1e-3,
            batch_size: 128,
            reconstruction: Reconstruction::SumOverFeatures,
            seed: 0,
        }
    }
}

impl CvaeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("cvae: {msg}")));
        if self.input_dim == 0 || self.latent_dim == 0 || self.condition_dim == 0 {
            return bad("input, latent and condition dimensions must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        Ok(())
    }

    fn layer_plan(&self, input: usize, output: usize) -> (Vec<usize>, Vec<Activation>) {
        let mut dims = vec![input];
        dims.extend(&self.hidden);
        dims.push(output);
        let mut acts = vec![Activation::Relu; self.hidden.len()];
        acts.push(Activation::Identity);
        (dims, acts)
    }
}

/// Encoder `(x || c) -> (mu || log_var)` and decoder `(z || c) -> x_hat`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CvaeModelRecord")]
pub struct CvaeModel {
    pub(crate) encoder: Mlp,
    pub(crate) decoder: Mlp,
    latent_dim: usize,
    condition_dim: usize,
}

impl CvaeModel {
    /// Freshly initialized model. The encoder uses `config.seed`, the decoder the next seed.
    pub fn new(config: &CvaeConfig) -> Result<Self> {
        config.validate()?;
        let (enc_dims, enc_acts) = config.layer_plan(
            config.input_dim + config.condition_dim,
            2 * config.latent_dim,
        );
        let (dec_dims, dec_acts) =
            config.layer_plan(config.latent_dim + config.condition_dim, config.input_dim);
        let encoder = init_network(&enc_dims, &enc_acts, config.seed)?;
        let decoder = init_network(&dec_dims, &dec_acts, config.seed.wrapping_add(1))?;
        Self::from_parts(encoder, decoder, config.latent_dim, config.condition_dim)
    }

    pub fn from_parts(
        encoder: Mlp,
        decoder: Mlp,
        latent_dim: usize,
        condition_dim: usize,
    ) -> Result<Self> {
        if encoder.output_dim() != 2 * latent_dim {
            return Err(Error::dims(
                "encoder output",
                2 * latent_dim,
                encoder.output_dim(),
            ));
        }
        if decoder.input_dim() != latent_dim + condition_dim {
            return Err(Error::dims(
                "decoder input",
                latent_dim + condition_dim,
                decoder.input_dim(),
            ));
        }
        if encoder.input_dim() != decoder.output_dim() + condition_dim {
            return Err(Error::dims(
                "encoder input",
                decoder.output_dim() + condition_dim,
                encoder.input_dim(),
            ));
        }
        Ok(Self {
            encoder,
            decoder,
            latent_dim,
            condition_dim,
        })
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn condition_dim(&self) -> usize {
        self.condition_dim
    }

    pub fn input_dim(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn all_finite(&self) -> bool {
        [&self.encoder, &self.decoder].iter().all(|n| {
            n.param_slices()
                .iter()
                .all(|s| s.iter().all(|v| v.is_finite()))
        })
    }

    pub(crate) fn check_condition(&self, c_std: &Matrix, rows: usize) -> Result<()> {
        if c_std.cols() != self.condition_dim {
            return Err(Error::dims(
                "condition width",
                self.condition_dim,
                c_std.cols(),
            ));
        }
        if c_std.rows() != rows {
            return Err(Error::dims("condition rows", rows, c_std.rows()));
        }
        Ok(())
    }

    /// Posterior parameters `(mu, log_var)`; `log_var` is already clamped.
    pub fn encode(&self, x_std: &Matrix, c_std: &Matrix) -> Result<(Matrix, Matrix)> {
        if x_std.cols() != self.input_dim() {
            return Err(Error::dims("design width", self.input_dim(), x_std.cols()));
        }
        self.check_condition(c_std, x_std.rows())?;
        let out = self.encoder.predict(&x_std.hstack(c_std)?)?;
        let (mu, raw) = out.split_cols(self.latent_dim)?;
        Ok((mu, clamp_log_var(&raw)))
    }

    /// Decoder mean `x_hat` for latent codes `z` under condition `c`.
    pub fn decode(&self, z: &Matrix, c_std: &Matrix) -> Result<Matrix> {
        if z.cols() != self.latent_dim {
            return Err(Error::dims("latent width", self.latent_dim, z.cols()));
        }
        self.check_condition(c_std, z.rows())?;
        self.decoder.predict(&z.hstack(c_std)?)
    }
}

#[derive(Deserialize)]
struct CvaeModelRecord {
    encoder: Mlp,
    decoder: Mlp,
    latent_dim: usize,
    condition_dim: usize,
}

impl TryFrom<CvaeModelRecord> for CvaeModel {
    type Error = Error;

    fn try_from(r: CvaeModelRecord) -> Result<Self> {
        CvaeModel::from_parts(r.encoder, r.decoder, r.latent_dim, r.condition_dim)
    }
}

pub(crate) fn clamp_log_var(raw: &Matrix) -> Matrix {
    raw.map(|v| v.clamp(-LOG_VAR_LIMIT, LOG_VAR_LIMIT))
}

/// A reparameterized latent draw `z = mu + exp(log_var / 2) * epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    pub mu: Matrix,
    pub log_var: Matrix,
    pub epsilon: Matrix,
    pub z: Matrix,
}

pub fn reparameterize_with_noise(
    mu: &Matrix,
    log_var: &Matrix,
    epsilon: &Matrix,
) -> Result<LatentSample> {
    if mu.shape() != log_var.shape() || mu.shape() != epsilon.shape() {
        return Err(Error::dims(
            "reparameterization operand size",
            mu.as_slice().len(),
            log_var.as_slice().len().max(epsilon.as_slice().len()),
        ));
    }
    let mut z = mu.clone();
    for ((zv, &lv), &e) in z
        .as_mut_slice()
        .iter_mut()
        .zip(log_var.as_slice())
        .zip(epsilon.as_slice())
    {
        *zv += (0.5 * lv).exp() * e;
    }
    Ok(LatentSample {
        mu: mu.clone(),
        log_var: log_var.clone(),
        epsilon: epsilon.clone(),
        z,
    })
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

pub fn reparameterize<R: Rng + ?Sized>(
    mu: &Matrix,
    log_var: &Matrix,
    rng: &mut R,
) -> Result<LatentSample> {
    let eps = standard_normal_matrix(mu.rows(), mu.cols(), rng);
    reparameterize_with_noise(mu, log_var, &eps)
}

/// Closed-form `KL(N(mu, diag(exp(log_var))) || N(0, I))` for each row.
pub fn kl_divergence_diag_gaussian(mu: &Matrix, log_var: &Matrix) -> Result<Vec<f64>> {
    if mu.shape() != log_var.shape() {
        return Err(Error::dims(
            "kl operand size",
            mu.as_slice().len(),
            log_var.as_slice().len(),
        ));
    }
    Ok(mu
        .row_iter()
        .zip(log_var.row_iter())
        .map(|(m, lv)| {
            -0.5 * m
                .iter()
                .zip(lv)
                .map(|(&m, &lv)| 1.0 + lv - m * m - lv.exp())
                .sum::<f64>()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElboBreakdown {
    pub reconstruction: f64,
    /// Batch mean of the per-row KL divergence.
    pub kl_divergence: f64,
    /// `reconstruction + beta * kl_divergence`, the negative ELBO being minimized.
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvaeGradients {
    pub encoder: GradientBundle,
    pub decoder: GradientBundle,
}

/// Loss and exact parameter gradients of the negative ELBO for a fixed noise draw.
pub fn elbo_loss_with_noise(
    model: &CvaeModel,
    x_std: &Matrix,
    c_std: &Matrix,
    beta: f64,
    reconstruction: Reconstruction,
    epsilon: &Matrix,
) -> Result<(ElboBreakdown, CvaeGradients)> {
    let n = x_std.rows();
    if n == 0 {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    if x_std.cols() != model.input_dim() {
        return Err(Error::dims("design width", model.input_dim(), x_std.cols()));
    }
    model.check_condition(c_std, n)?;
    let d = model.latent_dim;

    let enc_cache = model.encoder.forward(&x_std.hstack(c_std)?)?;
    let (mu, raw_log_var) = enc_cache.output().split_cols(d)?;
    let log_var = clamp_log_var(&raw_log_var);
    let sample = reparameterize_with_noise(&mu, &log_var, epsilon)?;

    let dec_cache = model.decoder.forward(&sample.z.hstack(c_std)?)?;
    let (mse, mut d_xhat) = crate::nn::mse_loss(dec_cache.output(), x_std)?;
    let rec_scale = match reconstruction {
        Reconstruction::SumOverFeatures => model.input_dim() as f64,
        Reconstruction::MeanOverElements => 1.0,
    };
    let rec = rec_scale * mse;
    d_xhat
        .as_mut_slice()
        .iter_mut()
        .for_each(|g| *g *= rec_scale);

    let kl_rows = kl_divergence_diag_gaussian(&mu, &log_var)?;
    let kl = kl_rows.iter().sum::<f64>() / n as f64;
    let breakdown = ElboBreakdown {
        reconstruction: rec,
        kl_divergence: kl,
        total: rec + beta * kl,
    };

    let (dec_grads, d_dec_in) = model.decoder.backward(&dec_cache, &d_xhat)?;
    let kl_weight = beta / n as f64;
    let mut d_enc_out = Matrix::zeros(n, 2 * d);
    for r in 0..n {
        let dz = &d_dec_in.row(r)[..d];
        let (m, lv, raw, e) = (
            mu.row(r),
            log_var.row(r),
            raw_log_var.row(r),
            sample.epsilon.row(r),
        );
        let out = d_enc_out.row_mut(r);
        for k in 0..d {
            let sigma = (0.5 * lv[k]).exp();
            out[k] = dz[k] + kl_weight * m[k];
            let d_lv = dz[k] * e[k] * 0.5 * sigma + kl_weight * 0.5 * (lv[k].exp() - 1.0);
            out[d + k] = if raw[k].abs() <= LOG_VAR_LIMIT {
                d_lv
            } else {
                0.0
            };
        }
    }
    let (enc_grads, _) = model.encoder.backward(&enc_cache, &d_enc_out)?;
    Ok((
        breakdown,
        CvaeGradients {
            encoder: enc_grads,
            decoder: dec_grads,
        },
    ))
}

/// [`elbo_loss_with_noise`] with a fresh standard-normal draw (one sample per row).
pub fn elbo_loss<R: Rng + ?Sized>(
    model: &CvaeModel,
    x_std: &Matrix,
    c_std: &Matrix,
    beta: f64,
    reconstruction: Reconstruction,
    rng: &mut R,
) -> Result<(ElboBreakdown, CvaeGradients)> {
    let eps = standard_normal_matrix(x_std.rows(), model.latent_dim, rng);
    elbo_loss_with_noise(model, x_std, c_std, beta, reconstruction, &eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> CvaeConfig {
        CvaeConfig {
            input_dim: 3,
            latent_dim: 2,
            hidden: vec![6],
            seed: 11,
            ..CvaeConfig::default()
        }
    }

    #[test]
    fn default_model_has_declared_shapes() {
        let model = CvaeModel::new(&CvaeConfig::default()).unwrap();
        assert_eq!(model.encoder().dims(), vec![6, 128, 128, 16]);
        assert_eq!(model.decoder().dims(), vec![9, 128, 128, 5]);
    }

    #[test]
    fn encode_shapes_and_zero_input() {
        let model = CvaeModel::new(&small_config()).unwrap();
        let x = Matrix::zeros(4, 3);
        let c = Matrix::zeros(4, 1);
        let (mu, lv) = model.encode(&x, &c).unwrap();
        assert_eq!(mu.shape(), (4, 2));
        assert_eq!(lv.shape(), (4, 2));
        // zero biases propagate zero input to a zero output
        assert!(mu.as_slice().iter().chain(lv.as_slice()).all(|&v| v == 0.0));
        assert!(model.encode(&Matrix::zeros(4, 2), &c).is_err());
        assert!(model.encode(&x, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn reparameterize_edge_cases() {
        let mu = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let zero = Matrix::zeros(1, 3);
        let s = reparameterize_with_noise(&mu, &zero, &zero).unwrap();
        assert_eq!(s.z, mu);
        let ones = Matrix::filled(1, 3, 1.0);
        let s = reparameterize_with_noise(&mu, &zero, &ones).unwrap();
        assert_eq!(s.z.as_slice(), &[1.5, 0.0, 3.0]);
        assert!(reparameterize_with_noise(&mu, &Matrix::zeros(1, 2), &zero).is_err());
    }

    #[test]
    fn reparameterized_std_matches_sigma() {
        let n = 100_000;
        let mu = Matrix::zeros(n, 1);
        let lv = Matrix::filled(n, 1, 4f64.ln());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = reparameterize(&mu, &lv, &mut rng).unwrap();
        let z = s.z.as_slice();
        let mean = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((sd - 2.0).abs() / 2.0 < 0.02, "sd {sd}");
    }

    #[test]
    fn kl_closed_form_values() {
        let kl = |m: f64, lv: f64| {
            kl_divergence_diag_gaussian(
                &Matrix::from_vec(1, 1, vec![m]).unwrap(),
                &Matrix::from_vec(1, 1, vec![lv]).unwrap(),
            )
            .unwrap()[0]
        };
        assert_eq!(kl(0.0, 0.0), 0.0);
        assert!((kl(1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((kl(0.0, 4f64.ln()) - (1.5 - 0.5 * 4f64.ln())).abs() < 1e-12);
        assert!((kl(0.0, 4f64.ln()) - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn beta_zero_total_is_reconstruction() {
        let model = CvaeModel::new(&small_config()).unwrap();
        let x = Matrix::from_vec(2, 3, vec![0.1, -0.3, 0.8, 1.2, 0.4, -0.9]).unwrap();
        let c = Matrix::from_vec(2, 1, vec![0.5, -0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (b, _) = elbo_loss(
            &model,
            &x,
            &c,
            0.0,
            Reconstruction::SumOverFeatures,
            &mut rng,
        )
        .unwrap();
        assert_eq!(b.total, b.reconstruction);
        assert!(b.kl_divergence >= 0.0);
    }

    #[test]
    fn reconstruction_reductions_differ_by_feature_count() {
        let model = CvaeModel::new(&small_config()).unwrap();
        let x = Matrix::from_vec(2, 3, vec![0.1, -0.3, 0.8, 1.2, 0.4, -0.9]).unwrap();
        let c = Matrix::from_vec(2, 1, vec![0.5, -0.5]).unwrap();
        let eps = Matrix::from_vec(2, 2, vec![0.3, -1.0, 0.2, 0.7]).unwrap();
        let (sum, _) =
            elbo_loss_with_noise(&model, &x, &c, 1.0, Reconstruction::SumOverFeatures, &eps)
                .unwrap();
        let (mean, _) =
            elbo_loss_with_noise(&model, &x, &c, 1.0, Reconstruction::MeanOverElements, &eps)
                .unwrap();
        assert!((sum.reconstruction - 3.0 * mean.reconstruction).abs() < 1e-12);
        assert_eq!(sum.kl_divergence, mean.kl_divergence);
    }

    #[test]
    fn config_validation() {
        assert!(CvaeConfig::default().validate().is_ok());
        for bad in [
            CvaeConfig {
                latent_dim: 0,
                ..CvaeConfig::default()
            },
            CvaeConfig {
                beta: -1.0,
                ..CvaeConfig::default()
            },
            CvaeConfig {
                epochs: 0,
                ..CvaeConfig::default()
            },
            CvaeConfig {
                batch_size: 0,
                ..CvaeConfig::default()
            },
            CvaeConfig {
                hidden: vec![0],
                ..CvaeConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
