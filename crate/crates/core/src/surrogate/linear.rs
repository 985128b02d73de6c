use serde::{Deserialize, Serialize};

use crate::dataset::{Design, FEATURE_COUNT};
use crate::error::{Error, Result};

/// Affine least-squares model `y = w . x + b`, fit in standardized space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSurrogate {
    pub weights: Design,
    pub intercept: f64,
}

impl LinearSurrogate {
    pub fn predict(&self, x: &Design) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

const COLS: usize = FEATURE_COUNT + 1;

/// Least-squares fit via Householder QR of the design matrix `[1 | x]`.
///
/// Fails with [`Error::RankDeficient`] when fewer than six points are given or when the
/// columns are linearly dependent.
pub fn fit_linear(xs: &[Design], ys: &[f64]) -> Result<LinearSurrogate> {
    if xs.len() != ys.len() {
        return Err(Error::dims("linear fit targets", xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < COLS {
        return Err(Error::RankDeficient);
    }
    // column-major copy of [1 | x]
    let mut a: Vec<Vec<f64>> = (0..COLS)
        .map(|j| {
            xs.iter()
                .map(|x| if j == 0 { 1.0 } else { x[j - 1] })
                .collect()
        })
        .collect();
    let mut b = ys.to_vec();
    let col_norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    for k in 0..COLS {
        let alpha = norm(&a[k][k..]);
        if alpha <= 1e-10 * col_norms[k].max(f64::MIN_POSITIVE) || alpha == 0.0 {
            return Err(Error::RankDeficient);
        }
        let alpha = if a[k][k] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let v_norm_sq: f64 = v.iter().map(|t| t * t).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k) {
            reflect(&v, v_norm_sq, &mut col[k..]);
        }
        reflect(&v, v_norm_sq, &mut b[k..]);
    }
    // back substitution on the upper-triangular R
    let mut coef = [0.0; COLS];
    for k in (0..COLS).rev() {
        let mut s = b[k];
        for j in k + 1..COLS {
            s -= a[j][k] * coef[j];
        }
        coef[k] = s / a[k][k];
    }
    Ok(LinearSurrogate {
        intercept: coef[0],
        weights: std::array::from_fn(|j| coef[j + 1]),
    })
}

fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

fn reflect(v: &[f64], v_norm_sq: f64, target: &mut [f64]) {
    let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / v_norm_sq;
    for (t, vi) in target.iter_mut().zip(v) {
        *t -= f * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Design> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                [
                    t.sin(),
                    (0.3 * t).cos(),
                    t / n as f64,
                    (t * t) % 7.0,
                    (1.7 * t).sin() * 2.0,
                ]
            })
            .collect()
    }

    #[test]
    fn exact_linear_data_is_recovered() {
        let xs = grid(12);
        let w = [1.5, -2.0, 0.25, 3.0, -0.5];
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 4.0 + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let fit = fit_linear(&xs, &ys).unwrap();
        assert!((fit.intercept - 4.0).abs() < 1e-8);
        for (a, b) in fit.weights.iter().zip(&w) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_target_gives_mean_intercept() {
        let xs = grid(10);
        let fit = fit_linear(&xs, &[2.5; 10]).unwrap();
        assert!((fit.intercept - 2.5).abs() < 1e-10);
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-10));
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let mut xs = grid(10);
        for x in &mut xs {
            x[3] = 2.0 * x[1] - x[0];
        }
        assert!(matches!(
            fit_linear(&xs, &[1.0; 10]),
            Err(Error::RankDeficient)
        ));
        assert!(matches!(
            fit_linear(&grid(5), &[1.0; 5]),
            Err(Error::RankDeficient)
        ));
        let mut constant = grid(10);
        for x in &mut constant {
            x[2] = 3.0;
        }
        assert!(matches!(
            fit_linear(&constant, &[1.0; 10]),
            Err(Error::RankDeficient)
        ));
    }
}
