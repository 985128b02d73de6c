use serde::{Deserialize, Serialize};

use super::network::{GradientBundle, Mlp};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moment estimates for a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moments: Vec<Vec<f64>>,
    second_moments: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    /// `tensor_lens` gives the length of each parameter tensor.
    pub fn new(tensor_lens: &[usize], config: AdamConfig) -> Self {
        Self {
            config,
            first_moments: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moments: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        }
    }

    pub fn for_network(net: &Mlp, config: AdamConfig) -> Self {
        let lens: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        Self::new(&lens, config)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first_moments
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second_moments
    }

    fn check_shapes(&self, params: &[&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moments.len() || grads.len() != self.first_moments.len() {
            return Err(Error::dims(
                "adam tensor count",
                self.first_moments.len(),
                params.len().max(grads.len()),
            ));
        }
        for (i, m) in self.first_moments.iter().enumerate() {
            if params[i].len() != m.len() {
                return Err(Error::dims(
                    format!("adam tensor {i}"),
                    m.len(),
                    params[i].len(),
                ));
            }
            if grads[i].len() != m.len() {
                return Err(Error::dims(
                    format!("adam gradient {i}"),
                    m.len(),
                    grads[i].len(),
                ));
            }
        }
        Ok(())
    }

    /// One bias-corrected Adam update. Nothing is modified if the shapes disagree.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        self.check_shapes(params, grads)?;
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i];
            let m = &mut self.first_moments[i];
            let v = &mut self.second_moments[i];
            for j in 0..p.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    pub fn step_network(&mut self, net: &mut Mlp, grads: &GradientBundle) -> Result<()> {
        if !grads.is_congruent_with(net) {
            return Err(Error::InvalidConfig(
                "gradient bundle does not match the network layout".into(),
            ));
        }
        let g = grads.slices();
        let mut p = net.param_slices_mut();
        self.step(&mut p, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_and_decays_moments() {
        let mut state = AdamState::new(&[2], AdamConfig::default());
        let mut p = [1.5, -0.25];
        state.step(&mut [&mut p[..]], &[&[0.3, -0.3][..]]).unwrap();
        let m_before = state.first_moments()[0].clone();
        let mut fresh = AdamState::new(&[2], AdamConfig::default());
        let mut q = vec![1.5, -0.25];
        fresh.step(&mut [&mut q[..]], &[&[0.0, 0.0][..]]).unwrap();
        assert_eq!(q, vec![1.5, -0.25]);

        state.step(&mut [&mut p[..]], &[&[0.0, 0.0][..]]).unwrap();
        for (after, before) in state.first_moments()[0].iter().zip(&m_before) {
            assert!(after.abs() < before.abs());
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2 => delta = -lr * g / (|g| + eps)
        let mut state = AdamState::new(&[1], AdamConfig::with_learning_rate(0.1));
        let mut p = [0.0];
        state.step(&mut [&mut p[..]], &[&[0.5][..]]).unwrap();
        let expected = -0.1 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 0.1).abs() < 1e-7);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn constant_gradient_moves_monotonically() {
        // Hand-rolled second step: m = 0.19 g, v = 0.001999 g^2, corrections 0.19 and 0.001999
        let mut state = AdamState::new(&[1], AdamConfig::with_learning_rate(0.01));
        let mut p = [1.0];
        let g = -2.0;
        state.step(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        let after_one = p[0];
        state.step(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        assert!(after_one > 1.0 && p[0] > after_one);
        let m = 0.9 * 0.1 * g + 0.1 * g;
        let v = 0.999 * 0.001 * g * g + 0.001 * g * g;
        let step2 = 0.01 * (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        assert!((p[0] - (after_one - step2)).abs() < 1e-14);
        assert_eq!(state.step_count(), 2);
    }

    #[test]
    fn shape_mismatch_is_rejected_without_side_effects() {
        let mut state = AdamState::new(&[2], AdamConfig::default());
        let mut p = [0.0; 3];
        assert!(state
            .step(&mut [&mut p[..]], &[&[1.0, 1.0, 1.0][..]])
            .is_err());
        assert_eq!(state.step_count(), 0);
        assert!(state.step(&mut [], &[]).is_err());
    }
}
