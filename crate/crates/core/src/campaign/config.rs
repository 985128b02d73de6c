use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cvae::{CvaeConfig, Reconstruction};
use crate::dataset::DataFormat;
use crate::error::{Error, Result};
use crate::sbo::SboConfig;
use crate::surrogate::SurrogateConfig;

/// Offsets added to the master seed to derive each stage's seed.
pub const SURROGATE_SEED_OFFSET: u64 = 1;
pub const SBO_SEED_OFFSET: u64 = 2;
pub const CVAE_SEED_OFFSET: u64 = 3;
pub const GENERATION_SEED_OFFSET: u64 = 4;

/// Dataset value that selects the built-in synthetic table instead of a file.
pub const SYNTHETIC_DATASET: &str = "synthetic";

/// Flat campaign configuration. Every key is optional in the TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Path to the dataset, or `synthetic` / `synthetic:<seed>`.
    pub dataset: Option<String>,
    pub dataset_format: DataFormat,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub generation_count: usize,
    pub target_percentile: f64,
    pub margin_fraction: f64,
    pub histogram_bins: usize,

    pub surrogate_hidden: Vec<usize>,
    pub surrogate_epochs: usize,
    pub surrogate_learning_rate: f64,
    pub surrogate_batch_size: usize,

    pub cvae_hidden: Vec<usize>,
    pub cvae_latent_dim: usize,
    pub cvae_beta: f64,
    pub cvae_epochs: usize,
    pub cvae_learning_rate: f64,
    pub cvae_batch_size: usize,
    pub cvae_reconstruction: Reconstruction,

    pub sbo_initial_samples: usize,
    pub sbo_budget: usize,

    pub surrogate_seed: Option<u64>,
    pub sbo_seed: Option<u64>,
    pub cvae_seed: Option<u64>,
    pub generation_seed: Option<u64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let cvae = CvaeConfig::default();
        let surrogate = SurrogateConfig::default();
        let sbo = SboConfig::default();
        Self {
            dataset: None,
            dataset_format: DataFormat::Whitespace,
            seed: 0,
            out_dir: PathBuf::from("genforge-out"),
            generation_count: 256,
            target_percentile: 10.0,
            margin_fraction: 0.05,
            histogram_bins: 30,
            surrogate_hidden: surrogate.hidden,
            surrogate_epochs: surrogate.epochs,
            surrogate_learning_rate: surrogate.learning_rate,
            surrogate_batch_size: surrogate.batch_size,
            cvae_hidden: cvae.hidden,
            cvae_latent_dim: cvae.latent_dim,
            cvae_beta: cvae.beta,
            cvae_epochs: cvae.epochs,
            cvae_learning_rate: cvae.learning_rate,
            cvae_batch_size: cvae.batch_size,
            cvae_reconstruction: cvae.reconstruction,
            sbo_initial_samples: sbo.initial_sample_count,
            sbo_budget: sbo.evaluation_budget,
            surrogate_seed: None,
            sbo_seed: None,
            cvae_seed: None,
            generation_seed: None,
        }
    }
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))
    }

    /// Reads a config file. A relative dataset path is taken relative to the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        if let (Some(ds), Some(dir)) = (&config.dataset, path.parent()) {
            let p = Path::new(ds);
            if !ds.starts_with(SYNTHETIC_DATASET) && p.is_relative() && !dir.as_os_str().is_empty()
            {
                config.dataset = Some(dir.join(p).to_string_lossy().into_owned());
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn surrogate_seed(&self) -> u64 {
        self.surrogate_seed
            .unwrap_or(self.seed.wrapping_add(SURROGATE_SEED_OFFSET))
    }

    pub fn sbo_seed(&self) -> u64 {
        self.sbo_seed
            .unwrap_or(self.seed.wrapping_add(SBO_SEED_OFFSET))
    }

    pub fn cvae_seed(&self) -> u64 {
        self.cvae_seed
            .unwrap_or(self.seed.wrapping_add(CVAE_SEED_OFFSET))
    }

    pub fn generation_seed(&self) -> u64 {
        self.generation_seed
            .unwrap_or(self.seed.wrapping_add(GENERATION_SEED_OFFSET))
    }

    pub fn cvae_config(&self) -> CvaeConfig {
        CvaeConfig {
            hidden: self.cvae_hidden.clone(),
            latent_dim: self.cvae_latent_dim,
            beta: self.cvae_beta,
            epochs: self.cvae_epochs,
            learning_rate: self.cvae_learning_rate,
            batch_size: self.cvae_batch_size,
            reconstruction: self.cvae_reconstruction,
            seed: self.cvae_seed(),
            ..CvaeConfig::default()
        }
    }

    pub fn surrogate_config(&self) -> SurrogateConfig {
        SurrogateConfig {
            hidden: self.surrogate_hidden.clone(),
            epochs: self.surrogate_epochs,
            learning_rate: self.surrogate_learning_rate,
            batch_size: self.surrogate_batch_size,
            seed: self.surrogate_seed(),
        }
    }

    pub fn sbo_config(&self) -> SboConfig {
        SboConfig {
            initial_sample_count: self.sbo_initial_samples,
            evaluation_budget: self.sbo_budget,
            seed: self.sbo_seed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_source()?;
        self.cvae_config().validate()?;
        self.surrogate_config().validate()?;
        self.sbo_config().validate()?;
        if self.generation_count == 0 {
            return Err(Error::InvalidConfig(
                "generation_count must be at least 1".into(),
            ));
        }
        if !(0.0..=100.0).contains(&self.target_percentile) {
            return Err(Error::InvalidConfig(format!(
                "target_percentile {} outside [0, 100]",
                self.target_percentile
            )));
        }
        if !(self.margin_fraction >= 0.0 && self.margin_fraction.is_finite()) {
            return Err(Error::InvalidConfig(
                "margin_fraction must be non-negative".into(),
            ));
        }
        if self.histogram_bins == 0 {
            return Err(Error::InvalidConfig(
                "histogram_bins must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn dataset_source(&self) -> Result<DatasetSource> {
        let raw = self
            .dataset
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no dataset configured (key `dataset`)".into()))?;
        DatasetSource::parse(raw, self.dataset_format)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    File { path: PathBuf, format: DataFormat },
    Synthetic { seed: u64 },
}

impl DatasetSource {
    pub fn parse(raw: &str, format: DataFormat) -> Result<Self> {
        match raw.strip_prefix(SYNTHETIC_DATASET) {
            Some("") => Ok(DatasetSource::Synthetic { seed: 0 }),
            Some(rest) => match rest.strip_prefix(':').map(str::parse) {
                Some(Ok(seed)) => Ok(DatasetSource::Synthetic { seed }),
                _ => Err(Error::InvalidConfig(format!(
                    "bad synthetic dataset spec `{raw}`"
                ))),
            },
            None => Ok(DatasetSource::File {
                path: PathBuf::from(raw),
                format,
            }),
        }
    }

    pub fn load(&self) -> Result<crate::dataset::Dataset> {
        match self {
            DatasetSource::File { path, format } => crate::dataset::load_dataset(path, *format),
            DatasetSource::Synthetic { seed } => Ok(crate::synthetic::airfoil_like(*seed)),
        }
    }
}
