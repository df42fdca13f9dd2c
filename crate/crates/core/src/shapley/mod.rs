//! Coalition games and Shapley values.
//!
//! Two exact routes are provided (enumeration over join orders, and the
//! weighted sum over subsets) plus a Monte-Carlo estimator that averages
//! marginal contributions along randomly sampled join orders. All three
//! read utilities through the game's memoizing cache.

mod exact;
mod game;
mod monte_carlo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{
    exact_shapley_permutation, exact_shapley_subset, PERMUTATION_PLAYER_LIMIT, SUBSET_PLAYER_LIMIT,
};
pub use game::{Coalition, CoalitionGame, UtilityCache, MAX_PLAYERS};
pub use monte_carlo::monte_carlo_shapley;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapleyError {
    #[error("{players} players exceeds the limit of {limit} for this method")]
    PlayerLimitExceeded { players: usize, limit: usize },
    #[error("a coalition game needs at least one player")]
    NoPlayers,
    #[error("monte-carlo estimation needs at least one sampled permutation")]
    NoSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapleyMethod {
    ExactPermutation,
    ExactSubset,
    MonteCarlo,
}

/// Per-player values, in the game's player order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub values: Vec<f64>,
    pub method: ShapleyMethod,
    /// Number of sampled permutations; 0 for exact methods.
    pub samples_used: usize,
    /// Distinct utility computations triggered by this call.
    pub utility_evaluations: u64,
}

impl ShapleyResult {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Number of distinct utility computations performed on `game`.
pub fn utility_eval_count(game: &CoalitionGame<'_>) -> u64 {
    game.utility_eval_count()
}
