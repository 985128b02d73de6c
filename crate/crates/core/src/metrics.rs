//! Portfolio assessment: validity, diversity, performance statistics and histograms.

use serde::{Deserialize, Serialize};

use crate::dataset::{Design, FeatureBounds, FEATURE_COUNT};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub flags: Vec<bool>,
    /// Feature indices outside their bounds, per design.
    pub violations: Vec<Vec<usize>>,
    pub valid_count: usize,
    pub validity_rate: f64,
    /// How many designs violate each feature.
    pub per_feature_violations: [usize; FEATURE_COUNT],
}

impl ValidityReport {
    pub fn total(&self) -> usize {
        self.flags.len()
    }

    pub fn valid_indices(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&i| self.flags[i]).collect()
    }
}

pub fn check_validity(designs: &[Design], bounds: &FeatureBounds) -> ValidityReport {
    let violations: Vec<Vec<usize>> = designs
        .iter()
        .map(|x| {
            (0..FEATURE_COUNT)
                .filter(|&j| !bounds.admits(j, x[j]))
                .collect()
        })
        .collect();
    let flags: Vec<bool> = violations.iter().map(Vec::is_empty).collect();
    let valid_count = flags.iter().filter(|&&f| f).count();
    let mut per_feature_violations = [0; FEATURE_COUNT];
    for &j in violations.iter().flatten() {
        per_feature_violations[j] += 1;
    }
    ValidityReport {
        validity_rate: if designs.is_empty() {
            0.0
        } else {
            valid_count as f64 / designs.len() as f64
        },
        flags,
        violations,
        valid_count,
        per_feature_violations,
    }
}

/// Mean pairwise Euclidean distance in raw feature units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityScore {
    pub value: f64,
    pub pair_count: usize,
}

pub fn diversity(designs: &[Design]) -> Result<DiversityScore> {
    let n = designs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "diversity needs at least two designs, got {n}"
        )));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += euclidean(&designs[i], &designs[j]);
        }
    }
    let pair_count = n * (n - 1) / 2;
    Ok(DiversityScore {
        value: sum / pair_count as f64,
        pair_count,
    })
}

pub fn euclidean(a: &Design, b: &Design) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub threshold: f64,
    /// Number of values strictly below `threshold`.
    pub below_count: usize,
    pub fraction_below_threshold: f64,
}

pub fn performance_stats(values: &[f64], threshold: f64) -> Result<PerformanceStats> {
    if values.is_empty() {
        return Err(Error::InsufficientData(
            "no predictions to summarize".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("performance value".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let below_count = values.iter().filter(|&&v| v < threshold).count();
    Ok(PerformanceStats {
        count: values.len(),
        mean,
        std: var.sqrt(),
        min: values.iter().cloned().fold(f64::INFINITY, f64::min),
        max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        threshold,
        below_count,
        fraction_below_threshold: below_count as f64 / n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub baseline_marker: f64,
}

/// Equal-width bins spanning `[min, max]`; every bin is half-open except the last, which is
/// closed. A constant sample gets the span `[v - 0.5, v + 0.5]`.
pub fn build_histogram(
    values: &[f64],
    bin_count: usize,
    baseline_marker: f64,
) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::InsufficientData(
            "histogram of an empty sample".into(),
        ));
    }
    if bin_count == 0 {
        return Err(Error::InvalidConfig(
            "histogram needs at least one bin".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("histogram value".into()));
    }
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bin_count as f64;
    let mut bin_edges: Vec<f64> = (0..bin_count).map(|k| lo + k as f64 * width).collect();
    bin_edges.push(hi);
    let mut counts = vec![0; bin_count];
    for &v in values {
        counts[bin_of(&bin_edges, v)] += 1;
    }
    Ok(Histogram {
        bin_edges,
        counts,
        baseline_marker,
    })
}

/// Index of the last bin whose left edge is `<= v`.
fn bin_of(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    edges[1..bins].partition_point(|&e| e <= v)
}
