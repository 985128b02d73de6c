use serde::{Deserialize, Serialize};

use super::records::{Dataset, Design, FEATURE_COUNT, FEATURE_NAMES, TARGET_NAME};
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const COLUMN_COUNT: usize = FEATURE_COUNT + 1;

/// Per-column affine scaling to zero mean and unit population variance.
///
/// Columns `0..5` are the design features, column `5` is the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: [f64; COLUMN_COUNT],
    pub stds: [f64; COLUMN_COUNT],
}

fn column_name(j: usize) -> &'static str {
    if j < FEATURE_COUNT {
        FEATURE_NAMES[j]
    } else {
        TARGET_NAME
    }
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.len() < 2 {
            return Err(Error::InsufficientData(
                "standardization needs at least two records".into(),
            ));
        }
        let n = ds.len() as f64;
        let mut means = [0.0; COLUMN_COUNT];
        for r in ds.records() {
            for (m, v) in means.iter_mut().zip(r.x.iter().chain([&r.y])) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = [0.0; COLUMN_COUNT];
        for r in ds.records() {
            for ((acc, v), m) in vars.iter_mut().zip(r.x.iter().chain([&r.y])).zip(&means) {
                *acc += (v - m).powi(2);
            }
        }
        let mut stds = [0.0; COLUMN_COUNT];
        for j in 0..COLUMN_COUNT {
            stds[j] = (vars[j] / n).sqrt();
            if stds[j].is_nan() || stds[j] <= 1e-12 * means[j].abs().max(1.0) {
                return Err(Error::ConstantColumn {
                    column: column_name(j).to_string(),
                });
            }
        }
        Ok(Self { means, stds })
    }

    pub fn transform_design(&self, x: &Design) -> Design {
        std::array::from_fn(|j| (x[j] - self.means[j]) / self.stds[j])
    }

    pub fn inverse_design(&self, z: &Design) -> Design {
        std::array::from_fn(|j| z[j] * self.stds[j] + self.means[j])
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        (y - self.means[FEATURE_COUNT]) / self.stds[FEATURE_COUNT]
    }

    pub fn inverse_target(&self, y_std: f64) -> f64 {
        y_std * self.stds[FEATURE_COUNT] + self.means[FEATURE_COUNT]
    }

    fn check_width(&self, m: &Matrix) -> Result<()> {
        if m.cols() != FEATURE_COUNT && m.cols() != COLUMN_COUNT {
            return Err(Error::dims(
                "standardizer column count",
                COLUMN_COUNT,
                m.cols(),
            ));
        }
        Ok(())
    }

    /// Standardizes a batch with either 5 (features) or 6 (features + target) columns.
    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check_width(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(out)
    }

    /// Exact inverse of [`Standardizer::transform`].
    pub fn inverse_transform(&self, m: &Matrix) -> Result<Matrix> {
        self.check_width(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.stds[j] + self.means[j];
            }
        }
        Ok(out)
    }

    /// Standardized `n x 5` feature matrix.
    pub fn transform_designs(&self, designs: &[Design]) -> Matrix {
        let rows: Vec<Design> = designs.iter().map(|d| self.transform_design(d)).collect();
        Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, FEATURE_COUNT))
    }

    pub fn inverse_designs(&self, m: &Matrix) -> Result<Vec<Design>> {
        if m.cols() != FEATURE_COUNT {
            return Err(Error::dims("design width", FEATURE_COUNT, m.cols()));
        }
        Ok(m.row_iter()
            .map(|row| self.inverse_design(&std::array::from_fn(|j| row[j])))
            .collect())
    }
}
