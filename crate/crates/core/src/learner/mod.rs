//! From-scratch classifiers over flat parameter vectors.

mod arch;
mod model;
mod params;

use thiserror::Error;

pub use arch::ArchitectureSpec;
pub use model::{
    accuracy, evaluate, init_params, local_train, loss_and_gradient, Evaluation, LabeledBatch,
    TrainConfig, PROB_FLOOR,
};
pub use params::{
    add_gaussian_noise, average_params, param_distance, weighted_aggregate, DistanceMetric,
    ParamVector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("parameter vectors have different architectures")]
    ArchMismatch,
    #[error("cannot aggregate an empty set of models")]
    EmptyCoalition,
    #[error("aggregation weights must be non-negative and sum to 1 (sum = {sum})")]
    WeightsNotNormalized { sum: f64 },
    #[error("parameters contain NaN or infinite values")]
    NonFiniteParameters,
    #[error("loss became non-finite during epoch {epoch}; learning rate too high?")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("no samples to train or evaluate on")]
    EmptyData,
    #[error("checkpoint ended early")]
    TruncatedCheckpoint,
}
