//! End-to-end campaign: each stage is a pure function of its inputs, and an [`ArtifactStore`]
//! persists stage outputs so stages can run one at a time.

mod config;
mod report;
mod store;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    CampaignConfig, DatasetSource, CVAE_SEED_OFFSET, GENERATION_SEED_OFFSET, SBO_SEED_OFFSET,
    SURROGATE_SEED_OFFSET, SYNTHETIC_DATASET,
};
pub use report::{
    summarize, BaselineSummary, CampaignReport, DatasetSummary, DesignRow, OracleSummary,
    PortfolioSummaries, ValiditySummary, DIVERSITY_NOTE, REPORT_FORMAT,
};
pub use store::{read_design_table, write_design_table, ArtifactStore};

use crate::cvae::{self, CvaeCheckpoint, CvaeModel};
use crate::dataset::{compute_bounds, percentile, Dataset, Design, FeatureBounds, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::check_validity;
use crate::sbo::{baseline_predicted_score, run_sbo, SboConfig, SboResult};
use crate::surrogate::{train_mlp_surrogate, MlpSurrogate, SurrogateConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Ingest,
    TrainSurrogate,
    Sbo,
    TrainCvae,
    Generate,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::TrainSurrogate,
        Stage::Sbo,
        Stage::TrainCvae,
        Stage::Generate,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::TrainSurrogate => "train-surrogate",
            Stage::Sbo => "sbo",
            Stage::TrainCvae => "train-cvae",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid configuration: {0}")]
    Config(#[source] Error),

    #[error("stage `{stage}` needs {artifact}; run `genforge {producer}` first")]
    MissingArtifact {
        stage: Stage,
        producer: Stage,
        artifact: String,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Error,
    },

    #[error("stage `{stage}` failed: {message}")]
    Inconsistent { stage: Stage, message: String },
}

impl CampaignError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            CampaignError::Config(_) => None,
            CampaignError::MissingArtifact { stage, .. }
            | CampaignError::Stage { stage, .. }
            | CampaignError::Inconsistent { stage, .. } => Some(*stage),
        }
    }
}

pub type CampaignResult<T> = std::result::Result<T, CampaignError>;

pub(crate) trait InStage<T> {
    fn in_stage(self, stage: Stage) -> CampaignResult<T>;
}

impl<T> InStage<T> for Result<T> {
    fn in_stage(self, stage: Stage) -> CampaignResult<T> {
        self.map_err(|source| CampaignError::Stage { stage, source })
    }
}

/// FNV-1a over the bit patterns of a float sequence, as 16 hex digits.
pub fn fingerprint<'a>(values: impl IntoIterator<Item = &'a f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

pub fn dataset_fingerprint(ds: &Dataset) -> String {
    fingerprint(
        ds.records()
            .iter()
            .flat_map(|r| r.x.iter().chain(std::iter::once(&r.y))),
    )
}

pub fn oracle_fingerprint(oracle: &MlpSurrogate) -> String {
    fingerprint(oracle.network.param_slices().into_iter().flatten())
}

pub const INGEST_FORMAT: &str = "genforge-ingest/1";
pub const ORACLE_FORMAT: &str = "genforge-oracle/1";
pub const SBO_FORMAT: &str = "genforge-sbo/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub format: String,
    pub dataset: DatasetSummary,
    pub standardizer: Standardizer,
    pub bounds: FeatureBounds,
    pub target_percentile: f64,
    pub target_condition_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleArtifact {
    pub format: String,
    pub config: SurrogateConfig,
    pub fingerprint: String,
    pub oracle: MlpSurrogate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SboArtifact {
    pub format: String,
    pub config: SboConfig,
    pub oracle_fingerprint: String,
    pub predicted_score: f64,
    pub result: SboResult,
}

/// Generated designs and the raw-unit condition they were generated for.
#[derive(Clone, Debug, PartialEq)]
pub struct Portfolio {
    pub condition_db: f64,
    pub designs: Vec<Design>,
}

fn check_format(stage: Stage, found: &str, expected: &str) -> CampaignResult<()> {
    if found == expected {
        Ok(())
    } else {
        Err(CampaignError::Inconsistent {
            stage,
            message: format!("artifact format `{found}` is not `{expected}`"),
        })
    }
}

/// Loads the configured dataset and fits the preprocessing artifacts.
pub fn ingest(config: &CampaignConfig) -> CampaignResult<(Dataset, IngestArtifact)> {
    let stage = Stage::Ingest;
    let source = config.dataset_source().map_err(CampaignError::Config)?;
    let ds = source.load().in_stage(stage)?;
    let standardizer = Standardizer::fit(&ds).in_stage(stage)?;
    let bounds = compute_bounds(&ds, config.margin_fraction).in_stage(stage)?;
    let target = percentile(&ds.targets(), config.target_percentile).in_stage(stage)?;
    let artifact = IngestArtifact {
        format: INGEST_FORMAT.into(),
        dataset: DatasetSummary {
            source: config.dataset.clone().unwrap_or_default(),
            records: ds.len(),
            fingerprint: dataset_fingerprint(&ds),
        },
        standardizer,
        bounds,
        target_percentile: config.target_percentile,
        target_condition_db: target,
    };
    Ok((ds, artifact))
}

/// Reloads the dataset for a later stage and checks it is the one that was ingested.
pub fn reload_dataset(
    config: &CampaignConfig,
    ingest: &IngestArtifact,
    stage: Stage,
) -> CampaignResult<Dataset> {
    check_format(stage, &ingest.format, INGEST_FORMAT)?;
    let ds = config
        .dataset_source()
        .map_err(CampaignError::Config)?
        .load()
        .in_stage(stage)?;
    if dataset_fingerprint(&ds) != ingest.dataset.fingerprint {
        return Err(CampaignError::Inconsistent {
            stage,
            message: "dataset changed since ingest; rerun `genforge ingest`".into(),
        });
    }
    Ok(ds)
}

pub fn train_surrogate(
    config: &CampaignConfig,
    ds: &Dataset,
    ingest: &IngestArtifact,
) -> CampaignResult<OracleArtifact> {
    let surrogate_config = config.surrogate_config();
    let oracle = train_mlp_surrogate(ds, &ingest.standardizer, &surrogate_config)
        .in_stage(Stage::TrainSurrogate)?;
    Ok(OracleArtifact {
        format: ORACLE_FORMAT.into(),
        config: surrogate_config,
        fingerprint: oracle_fingerprint(&oracle),
        oracle,
    })
}

pub fn check_oracle(oracle: &OracleArtifact, stage: Stage) -> CampaignResult<()> {
    check_format(stage, &oracle.format, ORACLE_FORMAT)?;
    if oracle_fingerprint(&oracle.oracle) != oracle.fingerprint {
        return Err(CampaignError::Inconsistent {
            stage,
            message: "oracle parameters do not match their recorded fingerprint".into(),
        });
    }
    Ok(())
}

pub fn sbo(
    config: &CampaignConfig,
    ds: &Dataset,
    ingest: &IngestArtifact,
    oracle: &OracleArtifact,
) -> CampaignResult<SboArtifact> {
    let stage = Stage::Sbo;
    check_oracle(oracle, stage)?;
    let sbo_config = config.sbo_config();
    let result = run_sbo(ds, &ingest.standardizer, &sbo_config).in_stage(stage)?;
    let predicted_score = baseline_predicted_score(&oracle.oracle, &result).in_stage(stage)?;
    Ok(SboArtifact {
        format: SBO_FORMAT.into(),
        config: sbo_config,
        oracle_fingerprint: oracle.fingerprint.clone(),
        predicted_score,
        result,
    })
}

pub fn train_cvae(
    config: &CampaignConfig,
    ds: &Dataset,
    ingest: &IngestArtifact,
) -> CampaignResult<CvaeCheckpoint> {
    let stage = Stage::TrainCvae;
    let cvae_config = config.cvae_config();
    let mut model = CvaeModel::new(&cvae_config).in_stage(stage)?;
    let trace = cvae::train(&mut model, ds, &ingest.standardizer, &cvae_config).in_stage(stage)?;
    Ok(CvaeCheckpoint::new(
        cvae_config,
        ingest.standardizer,
        model,
        trace,
    ))
}

pub fn generate(
    config: &CampaignConfig,
    ingest: &IngestArtifact,
    checkpoint: &CvaeCheckpoint,
) -> CampaignResult<Portfolio> {
    let stage = Stage::Generate;
    checkpoint.check_format().in_stage(stage)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.generation_seed());
    let designs = cvae::generate(
        &checkpoint.model,
        &checkpoint.standardizer,
        ingest.target_condition_db,
        config.generation_count,
        &mut rng,
    )
    .in_stage(stage)?;
    Ok(Portfolio {
        condition_db: ingest.target_condition_db,
        designs,
    })
}

/// Validity against the ingest bounds and the oracle's score for every design.
pub fn evaluate(
    bounds: &FeatureBounds,
    oracle: &OracleArtifact,
    designs: &[Design],
) -> CampaignResult<Vec<DesignRow>> {
    let stage = Stage::Evaluate;
    check_oracle(oracle, stage)?;
    let validity = check_validity(designs, bounds);
    let predicted = oracle.oracle.predict(designs).in_stage(stage)?;
    Ok(designs
        .iter()
        .zip(validity.violations)
        .zip(predicted)
        .map(|((x, violations), predicted_db)| DesignRow {
            x: *x,
            valid: violations.is_empty(),
            violations,
            predicted_db,
        })
        .collect())
}

pub fn build_report(
    config: &CampaignConfig,
    ingest: &IngestArtifact,
    oracle: &OracleArtifact,
    sbo: &SboArtifact,
    rows: Vec<DesignRow>,
) -> CampaignResult<CampaignReport> {
    let stage = Stage::Report;
    check_oracle(oracle, stage)?;
    check_format(stage, &sbo.format, SBO_FORMAT)?;
    if sbo.oracle_fingerprint != oracle.fingerprint {
        return Err(CampaignError::Inconsistent {
            stage,
            message: "the baseline was scored by a different oracle than the portfolio".into(),
        });
    }
    let threshold = sbo.predicted_score;
    let s = summarize(&rows, threshold, config.histogram_bins).in_stage(stage)?;
    Ok(CampaignReport {
        format: REPORT_FORMAT.into(),
        config: config.clone(),
        dataset: ingest.dataset.clone(),
        standardizer: ingest.standardizer,
        bounds: ingest.bounds,
        target_percentile: ingest.target_percentile,
        target_condition_db: ingest.target_condition_db,
        oracle: OracleSummary {
            fit: oracle.oracle.fit,
            fingerprint: oracle.fingerprint.clone(),
        },
        baseline: BaselineSummary {
            best_index: sbo.result.best_index,
            best_design: sbo.result.best_design,
            best_true_value: sbo.result.best_true_value,
            predicted_value: threshold,
            evaluations: sbo.result.evaluation_trace.len(),
        },
        validity: s.validity,
        diversity: s.diversity,
        diversity_note: DIVERSITY_NOTE.into(),
        performance: s.performance,
        histogram: s.histogram,
        designs: rows,
    })
}

/// Runs every stage in memory.
pub fn run_campaign(config: &CampaignConfig) -> CampaignResult<CampaignReport> {
    run_campaign_inner(config, None)
}

/// Runs every stage, saving each artifact to `store` as soon as it exists.
pub fn run_campaign_with_store(
    config: &CampaignConfig,
    store: &ArtifactStore,
) -> CampaignResult<CampaignReport> {
    run_campaign_inner(config, Some(store))
}

fn run_campaign_inner(
    config: &CampaignConfig,
    store: Option<&ArtifactStore>,
) -> CampaignResult<CampaignReport> {
    config.validate().map_err(CampaignError::Config)?;
    let (ds, ingest) = ingest(config)?;
    if let Some(s) = store {
        s.save_ingest(&ingest)?;
    }
    let oracle = train_surrogate(config, &ds, &ingest)?;
    if let Some(s) = store {
        s.save_oracle(&oracle)?;
    }
    let baseline = sbo(config, &ds, &ingest, &oracle)?;
    if let Some(s) = store {
        s.save_sbo(&baseline)?;
    }
    let checkpoint = train_cvae(config, &ds, &ingest)?;
    if let Some(s) = store {
        s.save_cvae(&checkpoint)?;
    }
    let portfolio = generate(config, &ingest, &checkpoint)?;
    if let Some(s) = store {
        s.save_portfolio(&portfolio)?;
    }
    let rows = evaluate(&ingest.bounds, &oracle, &portfolio.designs)?;
    if let Some(s) = store {
        s.save_evaluation(&rows)?;
    }
    let report = build_report(config, &ingest, &oracle, &baseline, rows)?;
    if let Some(s) = store {
        s.save_report(&report)?;
    }
    Ok(report)
}
