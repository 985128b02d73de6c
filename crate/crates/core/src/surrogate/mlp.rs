use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::{r2_score, rmse};
use crate::dataset::{epoch_batches, Dataset, Design, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{init_network, mse_loss, Activation, AdamConfig, AdamState, Matrix, Mlp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            epochs: 400,
            learning_rate: 1e-3,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "surrogate: hidden widths must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "surrogate: epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "surrogate: learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Training-set fit quality in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub rmse: f64,
    pub r2: f64,
}

/// Something that scores raw designs in dB.
pub trait PerformanceOracle {
    fn predict(&self, designs: &[Design]) -> Result<Vec<f64>>;
}

/// Frozen MLP regressor used as the shared performance oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSurrogate {
    pub network: Mlp,
    pub standardizer: Standardizer,
    pub fit: FitMetrics,
}

impl MlpSurrogate {
    /// Predictions in dB: standardize, forward, undo the target scaling.
    pub fn predict(&self, designs: &[Design]) -> Result<Vec<f64>> {
        if self.network.input_dim() != crate::dataset::FEATURE_COUNT
            || self.network.output_dim() != 1
        {
            return Err(Error::InvalidConfig(
                "surrogate network must map 5 features to 1 output".into(),
            ));
        }
        if designs.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.standardizer.transform_designs(designs);
        let out = self.network.predict(&x)?;
        let preds: Vec<f64> = out
            .as_slice()
            .iter()
            .map(|&v| self.standardizer.inverse_target(v))
            .collect();
        if preds.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteValue("surrogate prediction".into()));
        }
        Ok(preds)
    }
}

impl PerformanceOracle for MlpSurrogate {
    fn predict(&self, designs: &[Design]) -> Result<Vec<f64>> {
        MlpSurrogate::predict(self, designs)
    }
}

/// Trains `5 -> hidden -> 1` on standardized features and target with MSE and Adam.
pub fn train_mlp_surrogate(
    ds: &Dataset,
    standardizer: &Standardizer,
    config: &SurrogateConfig,
) -> Result<MlpSurrogate> {
    config.validate()?;
    let mut dims = vec![crate::dataset::FEATURE_COUNT];
    dims.extend(&config.hidden);
    dims.push(1);
    let mut acts = vec![Activation::Relu; config.hidden.len()];
    acts.push(Activation::Identity);
    let mut network = init_network(&dims, &acts, config.seed)?;

    let x_all = standardizer.transform_designs(&ds.designs());
    let y_all = Matrix::column(
        &ds.targets()
            .iter()
            .map(|&y| standardizer.transform_target(y))
            .collect::<Vec<_>>(),
    );
    let mut opt = AdamState::for_network(
        &network,
        AdamConfig::with_learning_rate(config.learning_rate),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    for epoch in 0..config.epochs {
        for (b, idx) in epoch_batches(ds.len(), config.batch_size, &mut rng)
            .iter()
            .enumerate()
        {
            let x = x_all.select_rows(idx);
            let y = y_all.select_rows(idx);
            let cache = network.forward(&x)?;
            let (loss, grad) = mse_loss(cache.output(), &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { epoch, batch: b });
            }
            let (grads, _) = network.backward(&cache, &grad)?;
            opt.step_network(&mut network, &grads)?;
        }
    }
    let mut surrogate = MlpSurrogate {
        network,
        standardizer: *standardizer,
        fit: FitMetrics {
            rmse: f64::NAN,
            r2: f64::NAN,
        },
    };
    let preds = surrogate.predict(&ds.designs())?;
    let truth = ds.targets();
    surrogate.fit = FitMetrics {
        rmse: rmse(&preds, &truth)?,
        r2: if truth.len() >= 2 {
            r2_score(&preds, &truth)?
        } else {
            f64::NAN
        },
    };
    Ok(surrogate)
}
