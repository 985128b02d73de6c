use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    CampaignError, CampaignReport, CampaignResult, DesignRow, InStage, IngestArtifact,
    OracleArtifact, Portfolio, SboArtifact, Stage,
};
use crate::cvae::CvaeCheckpoint;
use crate::dataset::{
    read_table, write_table, DataFormat, Design, FeatureBounds, FEATURE_COUNT, FEATURE_NAMES,
};
use crate::error::{Error, Result};
use crate::metrics::check_validity;

/// Directory holding the artifacts of one campaign.
#[derive(Clone, Debug)]
pub struct ArtifactStore {
    dir: PathBuf,
}

impl ArtifactStore {
    pub const INGEST: &'static str = "ingest.json";
    pub const ORACLE: &'static str = "oracle.json";
    pub const SBO: &'static str = "sbo.json";
    pub const CVAE: &'static str = "cvae.json";
    pub const PORTFOLIO: &'static str = "portfolio.tsv";
    pub const EVALUATION: &'static str = "evaluation.tsv";
    pub const REPORT: &'static str = "report.json";
    pub const SUMMARY: &'static str = "summary.txt";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ensure_dir(&self, stage: Stage) -> CampaignResult<()> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| Error::io(&self.dir, e))
            .in_stage(stage)
    }

    fn write_text(&self, stage: Stage, name: &str, text: &str) -> CampaignResult<()> {
        self.ensure_dir(stage)?;
        let path = self.path(name);
        fs::write(&path, text)
            .map_err(|e| Error::io(path, e))
            .in_stage(stage)
    }

    fn save_json<T: Serialize>(&self, stage: Stage, name: &str, value: &T) -> CampaignResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(Error::from)
            .in_stage(stage)?;
        text.push('\n');
        self.write_text(stage, name, &text)
    }

    /// Reads an upstream artifact, naming the stage that produces it when it is missing.
    fn load_json<T: DeserializeOwned>(
        &self,
        stage: Stage,
        producer: Stage,
        name: &str,
    ) -> CampaignResult<T> {
        let path = self.require(stage, producer, name)?;
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::io(&path, e))
            .in_stage(stage)?;
        serde_json::from_str(&text).map_err(|e| CampaignError::Inconsistent {
            stage,
            message: format!("{}: {e}", path.display()),
        })
    }

    fn require(&self, stage: Stage, producer: Stage, name: &str) -> CampaignResult<PathBuf> {
        let path = self.path(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(CampaignError::MissingArtifact {
                stage,
                producer,
                artifact: path.display().to_string(),
            })
        }
    }

    pub fn save_ingest(&self, a: &IngestArtifact) -> CampaignResult<()> {
        self.save_json(Stage::Ingest, Self::INGEST, a)
    }

    pub fn load_ingest(&self, stage: Stage) -> CampaignResult<IngestArtifact> {
        self.load_json(stage, Stage::Ingest, Self::INGEST)
    }

    pub fn save_oracle(&self, a: &OracleArtifact) -> CampaignResult<()> {
        self.save_json(Stage::TrainSurrogate, Self::ORACLE, a)
    }

    pub fn load_oracle(&self, stage: Stage) -> CampaignResult<OracleArtifact> {
        self.load_json(stage, Stage::TrainSurrogate, Self::ORACLE)
    }

    pub fn save_sbo(&self, a: &SboArtifact) -> CampaignResult<()> {
        self.save_json(Stage::Sbo, Self::SBO, a)
    }

    pub fn load_sbo(&self, stage: Stage) -> CampaignResult<SboArtifact> {
        self.load_json(stage, Stage::Sbo, Self::SBO)
    }

    pub fn save_cvae(&self, c: &CvaeCheckpoint) -> CampaignResult<()> {
        self.save_json(Stage::TrainCvae, Self::CVAE, c)
    }

    pub fn load_cvae(&self, stage: Stage) -> CampaignResult<CvaeCheckpoint> {
        self.load_json(stage, Stage::TrainCvae, Self::CVAE)
    }

    pub fn save_portfolio(&self, p: &Portfolio) -> CampaignResult<()> {
        let stage = Stage::Generate;
        self.ensure_dir(stage)?;
        let path = self.path(Self::PORTFOLIO);
        let file = File::create(&path)
            .map_err(|e| Error::io(&path, e))
            .in_stage(stage)?;
        write_design_table(BufWriter::new(file), &p.designs, p.condition_db)
            .map_err(|e| Error::io(&path, e))
            .in_stage(stage)
    }

    pub fn load_portfolio(&self, stage: Stage) -> CampaignResult<Portfolio> {
        let path = self.require(stage, Stage::Generate, Self::PORTFOLIO)?;
        let (designs, conditions) = read_design_table(&path).in_stage(stage)?;
        let condition_db = conditions.first().copied().flatten().unwrap_or(f64::NAN);
        Ok(Portfolio {
            condition_db,
            designs,
        })
    }

    pub fn save_evaluation(&self, rows: &[DesignRow]) -> CampaignResult<()> {
        let stage = Stage::Evaluate;
        self.ensure_dir(stage)?;
        let path = self.path(Self::EVALUATION);
        let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
        header.extend(["valid", "predicted_db"]);
        let file = File::create(&path)
            .map_err(|e| Error::io(&path, e))
            .in_stage(stage)?;
        let mut w = BufWriter::new(file);
        write_table(
            &mut w,
            DataFormat::Whitespace,
            Some(&header),
            rows.iter().map(|r| {
                let mut row = r.x.to_vec();
                row.push(if r.valid { 1.0 } else { 0.0 });
                row.push(r.predicted_db);
                row
            }),
        )
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&path, e))
        .in_stage(stage)
    }

    /// Reads the evaluation table back; violation lists are recomputed from `bounds`.
    pub fn load_evaluation(
        &self,
        stage: Stage,
        bounds: &FeatureBounds,
    ) -> CampaignResult<Vec<DesignRow>> {
        let path = self.require(stage, Stage::Evaluate, Self::EVALUATION)?;
        let file = File::open(&path)
            .map_err(|e| Error::io(&path, e))
            .in_stage(stage)?;
        let table = read_table(file, DataFormat::Whitespace, FEATURE_COUNT + 2).in_stage(stage)?;
        let designs: Vec<Design> = table
            .iter()
            .map(|r| std::array::from_fn(|j| r[j]))
            .collect();
        let validity = check_validity(&designs, bounds);
        table
            .iter()
            .zip(designs)
            .zip(validity.violations)
            .enumerate()
            .map(|(i, ((r, x), violations))| {
                let valid = r[FEATURE_COUNT] != 0.0;
                if valid != violations.is_empty() {
                    return Err(CampaignError::Inconsistent {
                        stage,
                        message: format!(
                            "evaluation row {}: validity flag disagrees with bounds",
                            i + 1
                        ),
                    });
                }
                Ok(DesignRow {
                    x,
                    valid,
                    violations,
                    predicted_db: r[FEATURE_COUNT + 1],
                })
            })
            .collect()
    }

    pub fn save_report(&self, report: &CampaignReport) -> CampaignResult<()> {
        self.write_text(Stage::Report, Self::REPORT, &report.to_json())?;
        self.write_text(Stage::Report, Self::SUMMARY, &report.summary())
    }

    pub fn load_report(&self, stage: Stage) -> CampaignResult<CampaignReport> {
        self.load_json(stage, Stage::Report, Self::REPORT)
    }
}

/// Writes a 6-column design table: five raw features and the conditioning level.
pub fn write_design_table<W: Write>(
    mut writer: W,
    designs: &[Design],
    condition_db: f64,
) -> std::io::Result<()> {
    let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
    header.push("condition_db");
    write_table(
        &mut writer,
        DataFormat::Whitespace,
        Some(&header),
        designs.iter().map(|x| {
            let mut row = x.to_vec();
            row.push(condition_db);
            row
        }),
    )?;
    writer.flush()
}

/// Reads a whitespace design table with six columns, or five when no condition is recorded.
pub fn read_design_table(path: &Path) -> Result<(Vec<Design>, Vec<Option<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let columns = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map_or(FEATURE_COUNT + 1, |l| l.split_whitespace().count());
    if columns != FEATURE_COUNT && columns != FEATURE_COUNT + 1 {
        return Err(Error::Parse {
            row: 1,
            message: format!("design tables have 5 or 6 columns, found {columns}"),
        });
    }
    let table = read_table(text.as_bytes(), DataFormat::Whitespace, columns)?;
    Ok(table
        .iter()
        .map(|r| (std::array::from_fn(|j| r[j]), r.get(FEATURE_COUNT).copied()))
        .unzip())
}
