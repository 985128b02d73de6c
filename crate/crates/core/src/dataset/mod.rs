//! Airfoil self-noise data: ingestion, standardization, bounds, percentiles and batching.

mod bounds;
mod records;
mod sampling;
mod standardize;

pub use bounds::{compute_bounds, FeatureBounds};
pub use records::{
    load_dataset, parse_dataset, read_table, write_dataset, write_table, DataFormat, Dataset,
    Design, DesignRecord, FEATURE_COUNT, FEATURE_NAMES, TARGET_NAME,
};
pub use sampling::{batches, epoch_batches, percentile};
pub use standardize::{Standardizer, COLUMN_COUNT};
