//! Greedy linear-surrogate optimization over the finite pool of dataset designs.
//!
//! Evaluating a design means looking up its recorded level, so the loop never proposes a point
//! outside the dataset. Lower is better.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Design, Standardizer};
use crate::error::{Error, Result};
use crate::surrogate::{fit_linear, LinearSurrogate, PerformanceOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SboConfig {
    pub initial_sample_count: usize,
    pub evaluation_budget: usize,
    pub seed: u64,
}

impl Default for SboConfig {
    fn default() -> Self {
        Self {
            initial_sample_count: 20,
            evaluation_budget: 70,
            seed: 0,
        }
    }
}

impl SboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_sample_count < 6 {
            return Err(Error::InvalidConfig(format!(
                "sbo: initial_sample_count must be at least 6 for a linear fit, got {}",
                self.initial_sample_count
            )));
        }
        if self.evaluation_budget < self.initial_sample_count {
            return Err(Error::InvalidConfig(format!(
                "sbo: evaluation_budget {} is smaller than initial_sample_count {}",
                self.evaluation_budget, self.initial_sample_count
            )));
        }
        Ok(())
    }
}

/// One true evaluation: the dataset row that was looked up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub design: Design,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SboResult {
    pub best_index: usize,
    pub best_design: Design,
    pub best_true_value: f64,
    pub evaluation_trace: Vec<Evaluation>,
    /// Surrogate fitted on the complete trace.
    pub final_surrogate: LinearSurrogate,
}

impl SboResult {
    /// Best value seen after each evaluation.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        self.evaluation_trace
            .iter()
            .scan(f64::INFINITY, |best, e| {
                *best = best.min(e.value);
                Some(*best)
            })
            .collect()
    }
}

/// Random initial sample, then repeatedly refit a linear model on everything evaluated so far
/// and evaluate the unevaluated row with the lowest predicted level (ties go to the lowest index).
pub fn run_sbo(ds: &Dataset, standardizer: &Standardizer, config: &SboConfig) -> Result<SboResult> {
    config.validate()?;
    let n = ds.len();
    if config.evaluation_budget > n {
        return Err(Error::InvalidConfig(format!(
            "sbo: evaluation_budget {} exceeds the {} available designs",
            config.evaluation_budget, n
        )));
    }
    let pool: Vec<Design> = ds
        .designs()
        .iter()
        .map(|x| standardizer.transform_design(x))
        .collect();
    let targets: Vec<f64> = ds
        .targets()
        .iter()
        .map(|&y| standardizer.transform_target(y))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluated = vec![false; n];
    let mut order: Vec<usize> = sample(&mut rng, n, config.initial_sample_count).into_vec();
    for &i in &order {
        evaluated[i] = true;
    }
    let fit = |order: &[usize]| {
        let xs: Vec<Design> = order.iter().map(|&i| pool[i]).collect();
        let ys: Vec<f64> = order.iter().map(|&i| targets[i]).collect();
        fit_linear(&xs, &ys)
    };
    while order.len() < config.evaluation_budget {
        let model = fit(&order)?;
        let mut choice: Option<(usize, f64)> = None;
        for (i, x) in pool.iter().enumerate() {
            if evaluated[i] {
                continue;
            }
            let p = model.predict(x);
            if choice.map_or(true, |(_, best)| p < best) {
                choice = Some((i, p));
            }
        }
        let (next, _) = choice.expect("budget does not exceed the pool size");
        evaluated[next] = true;
        order.push(next);
    }
    let final_surrogate = fit(&order)?;

    let records = ds.records();
    let evaluation_trace: Vec<Evaluation> = order
        .iter()
        .map(|&i| Evaluation {
            index: i,
            design: records[i].x,
            value: records[i].y,
        })
        .collect();
    let best = evaluation_trace
        .iter()
        .fold(None::<&Evaluation>, |acc, e| match acc {
            Some(b) if b.value <= e.value => Some(b),
            _ => Some(e),
        })
        .expect("non-empty trace");
    Ok(SboResult {
        best_index: best.index,
        best_design: best.design,
        best_true_value: best.value,
        evaluation_trace,
        final_surrogate,
    })
}

/// The oracle's score for the SBO incumbent.
pub fn baseline_predicted_score<O: PerformanceOracle + ?Sized>(
    oracle: &O,
    result: &SboResult,
) -> Result<f64> {
    Ok(oracle.predict(&[result.best_design])?[0])
}
