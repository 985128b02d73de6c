//! Performance oracles: the MLP scorer and the linear model used by the SBO loop.

mod fit;
mod linear;
mod mlp;

pub use fit::{r2_score, rmse};
pub use linear::{fit_linear, LinearSurrogate};
pub use mlp::{train_mlp_surrogate, FitMetrics, MlpSurrogate, PerformanceOracle, SurrogateConfig};
