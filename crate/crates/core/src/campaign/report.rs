use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::CampaignConfig;
use crate::dataset::{Design, FeatureBounds, Standardizer, FEATURE_COUNT, FEATURE_NAMES};
use crate::metrics::{
    build_histogram, check_validity, diversity, performance_stats, DiversityScore, Histogram,
    PerformanceStats,
};
use crate::surrogate::FitMetrics;

pub const REPORT_FORMAT: &str = "genforge-report/1";

pub const DIVERSITY_NOTE: &str = "mean pairwise Euclidean distance over valid designs in raw \
    feature units; dominated by the frequency column (Hz) and not comparable across unit systems";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub records: usize,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub fit: FitMetrics,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub best_index: usize,
    pub best_design: Design,
    pub best_true_value: f64,
    pub predicted_value: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValiditySummary {
    pub total: usize,
    pub valid_count: usize,
    pub validity_rate: f64,
    pub per_feature_violations: [usize; FEATURE_COUNT],
}

/// One generated design as scored by the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub x: Design,
    pub valid: bool,
    pub violations: Vec<usize>,
    pub predicted_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub format: String,
    pub config: CampaignConfig,
    pub dataset: DatasetSummary,
    pub standardizer: Standardizer,
    pub bounds: FeatureBounds,
    pub target_percentile: f64,
    pub target_condition_db: f64,
    pub oracle: OracleSummary,
    pub baseline: BaselineSummary,
    pub validity: ValiditySummary,
    /// Absent when fewer than two designs are valid.
    pub diversity: Option<DiversityScore>,
    pub diversity_note: String,
    /// Predicted levels of the valid designs against the baseline's predicted score.
    pub performance: Option<PerformanceStats>,
    pub histogram: Option<Histogram>,
    pub designs: Vec<DesignRow>,
}

/// Metric summaries derived from a per-design table.
#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioSummaries {
    pub validity: ValiditySummary,
    pub diversity: Option<DiversityScore>,
    pub performance: Option<PerformanceStats>,
    pub histogram: Option<Histogram>,
}

pub fn summarize(
    rows: &[DesignRow],
    threshold: f64,
    histogram_bins: usize,
) -> crate::Result<PortfolioSummaries> {
    let valid: Vec<&DesignRow> = rows.iter().filter(|r| r.valid).collect();
    let mut per_feature_violations = [0; FEATURE_COUNT];
    for &j in rows.iter().flat_map(|r| &r.violations) {
        per_feature_violations[j] += 1;
    }
    let validity = ValiditySummary {
        total: rows.len(),
        valid_count: valid.len(),
        validity_rate: if rows.is_empty() {
            0.0
        } else {
            valid.len() as f64 / rows.len() as f64
        },
        per_feature_violations,
    };
    let designs: Vec<Design> = valid.iter().map(|r| r.x).collect();
    let preds: Vec<f64> = valid.iter().map(|r| r.predicted_db).collect();
    let diversity = if designs.len() >= 2 {
        Some(diversity(&designs)?)
    } else {
        None
    };
    let (performance, histogram) = if preds.is_empty() {
        (None, None)
    } else {
        (
            Some(performance_stats(&preds, threshold)?),
            Some(build_histogram(&preds, histogram_bins, threshold)?),
        )
    };
    Ok(PortfolioSummaries {
        validity,
        diversity,
        performance,
        histogram,
    })
}

impl CampaignReport {
    /// Recomputes every summary from the per-design table and checks it against the stored one.
    pub fn verify(&self) -> Result<(), String> {
        if self.format != REPORT_FORMAT {
            return Err(format!("unsupported report format `{}`", self.format));
        }
        let designs: Vec<Design> = self.designs.iter().map(|r| r.x).collect();
        let check = check_validity(&designs, &self.bounds);
        for (i, row) in self.designs.iter().enumerate() {
            if row.valid != check.flags[i] || row.violations != check.violations[i] {
                return Err(format!(
                    "design {i}: validity does not match the stored bounds"
                ));
            }
        }
        let s = summarize(
            &self.designs,
            self.baseline.predicted_value,
            self.config.histogram_bins,
        )
        .map_err(|e| e.to_string())?;
        if s.validity != self.validity {
            return Err("validity summary does not match the design table".into());
        }
        if s.diversity != self.diversity {
            return Err("diversity does not match the design table".into());
        }
        if s.performance != self.performance {
            return Err("performance statistics do not match the design table".into());
        }
        if s.histogram != self.histogram {
            return Err("histogram does not match the design table".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plain-text digest for people.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "genforge campaign (seed {})", self.config.seed);
        let _ = writeln!(
            s,
            "dataset: {} ({} records)",
            self.dataset.source, self.dataset.records
        );
        let _ = writeln!(
            s,
            "oracle fit: R2 {:.4}, RMSE {:.3} dB",
            self.oracle.fit.r2, self.oracle.fit.rmse
        );
        let _ = writeln!(
            s,
            "target condition: {:.2} dB (percentile {})",
            self.target_condition_db, self.target_percentile
        );
        let b = &self.baseline;
        let _ = writeln!(
            s,
            "sbo baseline: row {} after {} evaluations, true {:.2} dB, predicted {:.2} dB",
            b.best_index, b.evaluations, b.best_true_value, b.predicted_value
        );
        let v = &self.validity;
        let _ = writeln!(
            s,
            "validity: {}/{} ({:.1}%)",
            v.valid_count,
            v.total,
            100.0 * v.validity_rate
        );
        for (j, &count) in v.per_feature_violations.iter().enumerate() {
            if count > 0 {
                let _ = writeln!(s, "  {} out of bounds: {count}", FEATURE_NAMES[j]);
            }
        }
        match &self.diversity {
            Some(d) => {
                let _ = writeln!(
                    s,
                    "diversity: {:.1} over {} pairs (raw units)",
                    d.value, d.pair_count
                );
            }
            None => {
                let _ = writeln!(s, "diversity: n/a (fewer than two valid designs)");
            }
        }
        if let Some(p) = &self.performance {
            let _ = writeln!(
                s,
                "predicted level: mean {:.2} dB, std {:.2}, min {:.2}, max {:.2}",
                p.mean, p.std, p.min, p.max
            );
            let _ = writeln!(
                s,
                "below baseline {:.2} dB: {}/{} ({:.1}%)",
                p.threshold,
                p.below_count,
                p.count,
                100.0 * p.fraction_below_threshold
            );
        }
        s
    }
}
