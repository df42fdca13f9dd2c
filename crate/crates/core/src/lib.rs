//! Shapley-value personalized federated learning, simulated in one process.
//!
//! Each client values the peers it downloads by playing a coalition game
//! whose utility is the validation accuracy of the averaged coalition
//! model. Those values drive both which peers it keeps downloading and how
//! it weights them when building its personalized model.
//!
//! * [`shapley`]: coalition games, exact and sampled Shapley values.
//! * [`learner`]: softmax-linear and one-hidden-layer models over flat
//!   parameter vectors.
//! * [`data`]: synthetic blobs, IDX files, pathological and Dirichlet
//!   partitions.
//! * [`federation`]: the round loop and the comparison baselines.
//! * [`harness`]: experiment configs, output files and repeat summaries.

// `!(x > 0.0)` style checks are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod federation;
pub mod harness;
pub mod learner;
pub mod rng;
pub mod shapley;

pub use data::{ClientSplit, Dataset, PartitionSpec};
pub use federation::{Algorithm, FederationConfig, RoundReport, RunOutcome, Simulation};
pub use harness::ExperimentConfig;
pub use learner::{ArchitectureSpec, ParamVector};
pub use shapley::{CoalitionGame, ShapleyResult};
