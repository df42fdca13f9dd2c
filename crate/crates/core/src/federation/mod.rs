//! The federation round loop: local training, the server-side model pool,
//! Shapley-driven download selection and personalized aggregation, plus the
//! baselines it is compared against.

mod client;
mod download;
mod engine;
mod participation;
mod report;
mod valuation;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::learner::{DistanceMetric, LearnerError, TrainConfig};
use crate::shapley::ShapleyError;

pub use client::{ClientState, ModelPool};
pub use download::{select_downloads, DownloadPlan, ExplorationPolicy};
pub use engine::{run_baseline, run_pfedsv, RunOutcome, Simulation};
pub use participation::client_participation_sampler;
pub use report::{ClientRoundEntry, RoundReport};
pub use valuation::{evaluate_coalition, CoalitionValuation, ValuationOptions};
pub use weights::{
    compute_weights, update_relevance, AggregationRecord, PAIRWISE_DISTANCE_EPS,
    PAIRWISE_SELF_DISTANCE,
};

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("invalid federation config: {0}")]
    Config(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "pfedsv")]
    PFedSv,
    Separate,
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "fedavg_ft")]
    FedAvgFt,
    PairwiseSim,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::PFedSv,
        Algorithm::Separate,
        Algorithm::FedAvg,
        Algorithm::FedAvgFt,
        Algorithm::PairwiseSim,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::PFedSv => "pfedsv",
            Algorithm::Separate => "separate",
            Algorithm::FedAvg => "fedavg",
            Algorithm::FedAvgFt => "fedavg_ft",
            Algorithm::PairwiseSim => "pairwise_sim",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| {
                format!(
                    "unknown algorithm `{s}` (expected one of {})",
                    Algorithm::ALL.map(Algorithm::id).join(", ")
                )
            })
    }
}

/// Monte-Carlo permutation budget per coalition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SampleCount {
    /// Three permutations per coalition member.
    #[default]
    Auto,
    Fixed(usize),
}

impl SampleCount {
    pub fn resolve(self, coalition_size: usize) -> usize {
        match self {
            SampleCount::Auto => 3 * coalition_size,
            SampleCount::Fixed(r) => r,
        }
    }
}

/// Everything the round loop needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub num_clients: usize,
    pub participation: f64,
    pub rounds: usize,
    pub train: TrainConfig,
    /// Nominal number of peer models downloaded per round.
    pub k: usize,
    pub samples: SampleCount,
    /// Smoothing factor of the relevance update.
    pub alpha_ema: f64,
    /// Coalitions up to this size are valued exactly.
    pub exact_threshold: usize,
    pub force_monte_carlo: bool,
    pub distance: DistanceMetric,
    pub noise_sigma: f64,
    pub exploration: ExplorationPolicy,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            num_clients: 10,
            participation: 1.0,
            rounds: 20,
            train: TrainConfig {
                epochs: 5,
                lr: 0.1,
                batch_size: 32,
            },
            k: 5,
            samples: SampleCount::Auto,
            alpha_ema: 0.5,
            exact_threshold: 6,
            force_monte_carlo: false,
            distance: DistanceMetric::L2,
            noise_sigma: 0.0,
            exploration: ExplorationPolicy::UnseenFirst,
            val_frac: 0.3,
            test_frac: 0.3,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<(), FederationError> {
        let fail = |msg: String| Err(FederationError::Config(msg));
        if self.num_clients == 0 {
            return fail("num_clients must be at least 1".into());
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return fail(format!(
                "participation must be in (0, 1], got {}",
                self.participation
            ));
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if let SampleCount::Fixed(0) = self.samples {
            return fail("mc_samples must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha_ema) {
            return fail(format!(
                "alpha_ema must be in [0, 1], got {}",
                self.alpha_ema
            ));
        }
        if self.exact_threshold > crate::shapley::SUBSET_PLAYER_LIMIT {
            return fail(format!(
                "exact_threshold must be at most {}",
                crate::shapley::SUBSET_PLAYER_LIMIT
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return fail(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            ));
        }
        self.train.validate()?;
        crate::data::split_sizes(3, self.val_frac, self.test_frac)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_ids_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.id().parse::<Algorithm>().unwrap(), a);
        }
        assert!("fedprox".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FederationConfig::default().validate().is_ok());
        let bad = [
            FederationConfig {
                participation: 0.0,
                ..Default::default()
            },
            FederationConfig {
                num_clients: 0,
                ..Default::default()
            },
            FederationConfig {
                alpha_ema: 1.5,
                ..Default::default()
            },
            FederationConfig {
                samples: SampleCount::Fixed(0),
                ..Default::default()
            },
            FederationConfig {
                val_frac: 0.6,
                test_frac: 0.5,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn auto_samples_are_three_per_member() {
        assert_eq!(SampleCount::Auto.resolve(6), 18);
        assert_eq!(SampleCount::Fixed(4).resolve(6), 4);
    }
}
