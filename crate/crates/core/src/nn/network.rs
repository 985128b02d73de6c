use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, MatView, Matrix};
use crate::error::{Error, Result};

static NEXT_STATE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_state_id() -> u64 {
    NEXT_STATE_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// Fully connected layer computing `activation(x W^T + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// `out_dim x in_dim`
    pub(crate) weights: Matrix,
    pub(crate) biases: Vec<f64>,
    pub(crate) activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::dims(
                "layer bias length",
                weights.rows(),
                biases.len(),
            ));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Returns `(pre_activation, activation)` for a batch.
    fn forward(&self, input: &Matrix) -> (Matrix, Matrix) {
        let n = input.rows();
        let mut pre = Matrix::zeros(n, self.out_dim());
        for r in 0..n {
            pre.row_mut(r).copy_from_slice(&self.biases);
        }
        gemm(
            1.0,
            MatView::new(input.as_slice(), n, self.in_dim(), self.in_dim(), 1),
            // W^T viewed in place: element (i, j) lives at j * in_dim + i
            MatView::new(
                self.weights.as_slice(),
                self.in_dim(),
                self.out_dim(),
                1,
                self.in_dim(),
            ),
            1.0,
            &mut pre,
        );
        let act = match self.activation {
            Activation::Identity => pre.clone(),
            a => pre.map(|v| a.apply(v)),
        };
        (pre, act)
    }
}

/// Activations recorded by [`Mlp::forward`] for a later [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    state_id: u64,
    /// Input fed to each layer.
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }

    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }

    pub fn layer_inputs(&self) -> &[Matrix] {
        &self.inputs
    }
}

/// Parameter gradients laid out exactly like the owning network.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientBundle {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
        }
    }

    pub fn is_congruent_with(&self, net: &Mlp) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net.layers.iter().enumerate().all(|(i, l)| {
                self.weights[i].shape() == l.weights.shape() && self.biases[i].len() == l.out_dim()
            })
    }

    /// Parameter tensors in the order `w0, b0, w1, b1, ...`, matching [`Mlp::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|&v| v == 0.0))
    }

    pub fn all_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Dense feed-forward network.
///
/// Every mutation of the parameters assigns a fresh state id; caches recorded against an
/// older state are rejected by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    state_id: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::LayerDimension {
                    layer: i + 1,
                    expected: pair[1].in_dim(),
                    found: pair[0].out_dim(),
                });
            }
        }
        Ok(Self {
            layers,
            state_id: fresh_state_id(),
        })
    }

    /// He-normal weights (`std = sqrt(2 / in_dim)`) and zero biases.
    ///
    /// `dims` lists every width including the input, so `dims.len() == activations.len() + 1`.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || activations.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::dims(
                "activation count",
                dims.len() - 1,
                activations.len(),
            ));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidConfig(format!(
                "layer width at position {pos} must be positive"
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .expect("He std is finite and positive");
                let data = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
                DenseLayer {
                    weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                    biases: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths including the input, e.g. `[5, 128, 128, 1]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(DenseLayer::out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.biases.len())
            .sum()
    }

    /// Mutable parameter tensors in the order `w0, b0, w1, b1, ...`.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.state_id = fresh_state_id();
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::LayerDimension {
                layer: 0,
                expected: self.input_dim(),
                found: batch.cols(),
            });
        }
        Ok(())
    }

    /// Forward pass recording everything needed for backpropagation.
    pub fn forward(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for layer in &self.layers {
            let (pre, act) = layer.forward(&current);
            inputs.push(current);
            pre_activations.push(pre);
            current = act;
        }
        Ok(ForwardCache {
            state_id: self.state_id,
            inputs,
            pre_activations,
            output: current,
        })
    }

    /// Forward pass without a cache. Safe to call from many threads on a shared network.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut current = batch.clone();
        for layer in &self.layers {
            current = layer.forward(&current).1;
        }
        Ok(current)
    }

    /// Backpropagates `output_gradient` (dLoss/dOutput) through the cached pass.
    ///
    /// Returns the parameter gradients and the gradient with respect to the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_gradient: &Matrix,
    ) -> Result<(GradientBundle, Matrix)> {
        if cache.state_id != self.state_id || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        if output_gradient.shape() != cache.output.shape() {
            return Err(Error::dims(
                "output gradient width",
                cache.output.cols(),
                output_gradient.cols(),
            ));
        }
        let n = output_gradient.rows();
        let mut grads = GradientBundle::zeros_like(self);
        let mut upstream = output_gradient.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
            if layer.activation == Activation::Relu {
                let pre = cache.pre_activations[i].as_slice();
                for (g, &z) in upstream.as_mut_slice().iter_mut().zip(pre) {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let input = &cache.inputs[i];
            // dW = dZ^T X
            gemm(
                1.0,
                MatView::new(upstream.as_slice(), out_dim, n, 1, out_dim),
                MatView::new(input.as_slice(), n, in_dim, in_dim, 1),
                0.0,
                &mut grads.weights[i],
            );
            let db = &mut grads.biases[i];
            for row in upstream.row_iter() {
                for (b, g) in db.iter_mut().zip(row) {
                    *b += g;
                }
            }
            // dX = dZ W
            let mut down = Matrix::zeros(n, in_dim);
            gemm(
                1.0,
                MatView::new(upstream.as_slice(), n, out_dim, out_dim, 1),
                MatView::new(layer.weights.as_slice(), out_dim, in_dim, in_dim, 1),
                0.0,
                &mut down,
            );
            upstream = down;
        }
        Ok((grads, upstream))
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            format: NETWORK_FORMAT.to_string(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    weights: l.weights.as_slice().to_vec(),
                    biases: l.biases.clone(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(checkpoint: &NetworkCheckpoint) -> Result<Self> {
        if checkpoint.format != NETWORK_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "unsupported network format `{}`",
                checkpoint.format
            )));
        }
        let layers = checkpoint
            .layers
            .iter()
            .map(|rec| {
                let weights = Matrix::from_vec(rec.out_dim, rec.in_dim, rec.weights.clone())?;
                DenseLayer::new(weights, rec.biases.clone(), rec.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }
}

/// Seeded He-normal initialization.
pub fn init_network(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Mlp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::init(dims, activations, &mut rng)
}

pub const NETWORK_FORMAT: &str = "genforge-mlp/1";

/// Language-neutral network snapshot. Weights are row-major `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format: String,
    pub layers: Vec<LayerRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_checkpoint().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ckpt = NetworkCheckpoint::deserialize(d)?;
        Mlp::from_checkpoint(&ckpt).map_err(serde::de::Error::custom)
    }
}
