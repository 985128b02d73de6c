pub mod campaign;
pub mod cvae;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod sbo;
pub mod surrogate;
pub mod synthetic;

pub use error::{Error, Result};
