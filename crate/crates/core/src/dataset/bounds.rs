use serde::{Deserialize, Serialize};

use super::records::{Dataset, Design, FEATURE_COUNT};
use crate::error::{Error, Result};

/// Observed per-feature range plus an extrapolation margin `delta = margin * (max - min)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub x_min: Design,
    pub x_max: Design,
    pub delta: Design,
}

impl FeatureBounds {
    pub fn lower(&self, j: usize) -> f64 {
        self.x_min[j] - self.delta[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.x_max[j] + self.delta[j]
    }

    /// Closed-interval membership of feature `j`.
    pub fn admits(&self, j: usize, value: f64) -> bool {
        value >= self.lower(j) && value <= self.upper(j)
    }
}

pub fn compute_bounds(ds: &Dataset, margin_fraction: f64) -> Result<FeatureBounds> {
    if !(margin_fraction >= 0.0 && margin_fraction.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "margin fraction must be finite and non-negative, got {margin_fraction}"
        )));
    }
    let first = ds.records().first().ok_or(Error::EmptyDataset)?;
    let (mut x_min, mut x_max) = (first.x, first.x);
    for r in ds.records() {
        for j in 0..FEATURE_COUNT {
            x_min[j] = x_min[j].min(r.x[j]);
            x_max[j] = x_max[j].max(r.x[j]);
        }
    }
    let delta = std::array::from_fn(|j| margin_fraction * (x_max[j] - x_min[j]));
    Ok(FeatureBounds {
        x_min,
        x_max,
        delta,
    })
}
