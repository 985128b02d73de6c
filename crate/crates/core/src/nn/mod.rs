//! Small dense network engine: forward pass, exact backpropagation, Adam, checkpoints.
//!
//! All arithmetic is `f64`. Batches are row-major [`Matrix`] values with one sample per row.

mod adam;
mod loss;
mod matrix;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use loss::mse_loss;
pub use matrix::Matrix;
pub use network::{
    init_network, Activation, DenseLayer, ForwardCache, GradientBundle, LayerRecord, Mlp,
    NetworkCheckpoint, NETWORK_FORMAT,
};
