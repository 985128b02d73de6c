//! Conditional variational autoencoder over standardized designs.
//!
//! The condition is the standardized performance value. The prior over the latent code is
//! `N(0, I)` regardless of the condition, the decoder is deterministic, and generation draws
//! its randomness from the latent code alone.

mod model;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use model::{
    elbo_loss, elbo_loss_with_noise, kl_divergence_diag_gaussian, reparameterize,
    reparameterize_with_noise, standard_normal_matrix, CvaeConfig, CvaeGradients, CvaeModel,
    ElboBreakdown, LatentSample, Reconstruction, LOG_VAR_LIMIT,
};

use crate::dataset::{epoch_batches, Dataset, Design, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Matrix};

/// Sample-weighted mean losses over one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub reconstruction: f64,
    pub kl_divergence: f64,
    pub total: f64,
}

/// Standardized training matrices: `x` is `n x 5`, `c` is `n x 1`.
pub fn standardized_training_data(ds: &Dataset, standardizer: &Standardizer) -> (Matrix, Matrix) {
    let x = standardizer.transform_designs(&ds.designs());
    let c: Vec<f64> = ds
        .records()
        .iter()
        .map(|r| standardizer.transform_target(r.y))
        .collect();
    (x, Matrix::column(&c))
}

/// Minimizes the negative ELBO with Adam. Single-threaded and deterministic in `config.seed`.
pub fn train(
    model: &mut CvaeModel,
    ds: &Dataset,
    standardizer: &Standardizer,
    config: &CvaeConfig,
) -> Result<Vec<EpochLoss>> {
    config.validate()?;
    if model.input_dim() != config.input_dim || model.latent_dim() != config.latent_dim {
        return Err(Error::InvalidConfig(
            "model dimensions do not match the training configuration".into(),
        ));
    }
    let (x_all, c_all) = standardized_training_data(ds, standardizer);
    let adam = AdamConfig::with_learning_rate(config.learning_rate);
    let mut enc_opt = AdamState::for_network(&model.encoder, adam);
    let mut dec_opt = AdamState::for_network(&model.decoder, adam);
    // the model initialization consumed `seed` and `seed + 1`
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut sums = [0.0; 3];
        for (b, idx) in epoch_batches(ds.len(), config.batch_size, &mut rng)
            .iter()
            .enumerate()
        {
            let x = x_all.select_rows(idx);
            let c = c_all.select_rows(idx);
            let (loss, grads) =
                elbo_loss(model, &x, &c, config.beta, config.reconstruction, &mut rng)?;
            if !loss.total.is_finite() || !grads.encoder.all_finite() || !grads.decoder.all_finite()
            {
                return Err(Error::NonFinite { epoch, batch: b });
            }
            enc_opt.step_network(&mut model.encoder, &grads.encoder)?;
            dec_opt.step_network(&mut model.decoder, &grads.decoder)?;
            let w = idx.len() as f64;
            sums[0] += w * loss.reconstruction;
            sums[1] += w * loss.kl_divergence;
            sums[2] += w * loss.total;
        }
        let n = ds.len() as f64;
        trace.push(EpochLoss {
            epoch,
            reconstruction: sums[0] / n,
            kl_divergence: sums[1] / n,
            total: sums[2] / n,
        });
    }
    Ok(trace)
}

/// Decodes `n` latent draws from the prior under a fixed target and maps them to raw units.
pub fn generate<R: Rng + ?Sized>(
    model: &CvaeModel,
    standardizer: &Standardizer,
    c_target_raw: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Design>> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "generation count must be at least 1".into(),
        ));
    }
    if !model.all_finite() {
        return Err(Error::NonFiniteValue("cvae parameters".into()));
    }
    if model.condition_dim() != 1 {
        return Err(Error::dims("condition width", 1, model.condition_dim()));
    }
    let z = standard_normal_matrix(n, model.latent_dim(), rng);
    let c = Matrix::filled(n, 1, standardizer.transform_target(c_target_raw));
    let x_std = model.decode(&z, &c)?;
    standardizer.inverse_designs(&x_std)
}

pub const CVAE_FORMAT: &str = "genforge-cvae/1";

/// Trained model plus everything needed to generate from it in isolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvaeCheckpoint {
    pub format: String,
    pub config: CvaeConfig,
    pub standardizer: Standardizer,
    pub model: CvaeModel,
    pub loss_trace: Vec<EpochLoss>,
}

impl CvaeCheckpoint {
    pub fn new(
        config: CvaeConfig,
        standardizer: Standardizer,
        model: CvaeModel,
        loss_trace: Vec<EpochLoss>,
    ) -> Self {
        Self {
            format: CVAE_FORMAT.to_string(),
            config,
            standardizer,
            model,
            loss_trace,
        }
    }

    pub fn check_format(&self) -> Result<()> {
        if self.format != CVAE_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unsupported cvae checkpoint format `{}`",
                self.format
            )));
        }
        Ok(())
    }
}
