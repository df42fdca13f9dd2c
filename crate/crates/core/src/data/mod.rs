//! Datasets, IDX loading, Non-IID partitioning and per-client splits.

mod dataset;
pub mod idx;
mod partition;
mod split;
mod synth;

use thiserror::Error;

pub use dataset::Dataset;
pub use idx::load_idx;
pub use partition::{
    partition_dirichlet, partition_pathological, PartitionSpec, MIN_CLIENT_SAMPLES,
};
pub use split::{split_client, split_sizes, ClientSplit};
pub use synth::synth_blobs;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("file ended before the declared data")]
    TruncatedFile,
    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("partition is infeasible: {0}")]
    InfeasiblePartition(String),
    #[error("client slice of {0} rows is too small to split (need at least 3)")]
    SliceTooSmall(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
