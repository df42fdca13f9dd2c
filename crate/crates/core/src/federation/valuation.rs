use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DownloadPlan, FederationError, ModelPool, SampleCount};
use crate::data::Dataset;
use crate::learner::{accuracy, average_params, ParamVector};
use crate::shapley::{exact_shapley_subset, monte_carlo_shapley, CoalitionGame, ShapleyResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationOptions {
    pub samples: SampleCount,
    pub exact_threshold: usize,
    pub force_monte_carlo: bool,
}

impl Default for ValuationOptions {
    fn default() -> Self {
        ValuationOptions {
            samples: SampleCount::Auto,
            exact_threshold: 6,
            force_monte_carlo: false,
        }
    }
}

/// Shapley values of a client's coalition: itself plus its downloads.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionValuation {
    /// Member ids; the valuing client comes first.
    pub members: Vec<usize>,
    /// One value per entry of `members`.
    pub values: Vec<f64>,
    pub result: ShapleyResult,
}

/// Plays the coalition game whose utility is the validation accuracy of the
/// averaged parameters of each sub-coalition.
pub fn evaluate_coalition<R: Rng + ?Sized>(
    client: usize,
    validation: &Dataset,
    plan: &DownloadPlan,
    pool: &ModelPool,
    options: &ValuationOptions,
    rng: &mut R,
) -> Result<CoalitionValuation, FederationError> {
    let mut members = Vec::with_capacity(plan.chosen.len() + 1);
    members.push(client);
    members.extend(plan.chosen.iter().copied().filter(|&j| j != client));

    let models: Vec<&ParamVector> = members
        .iter()
        .map(|&j| {
            pool.get(j).ok_or_else(|| {
                FederationError::Config(format!("client {j} has no upload in round {}", pool.round))
            })
        })
        .collect::<Result<_, _>>()?;
    let batch = validation.batch();
    // surface shape errors here rather than inside the utility callback
    accuracy(models[0], &batch)?;

    let game = CoalitionGame::new(members.clone(), |coalition| {
        let subset: Vec<&ParamVector> = coalition.positions().map(|p| models[p]).collect();
        average_params(&subset)
            .and_then(|avg| accuracy(&avg, &batch))
            .expect("coalition models and validation data were checked")
    })?;

    let exact = !options.force_monte_carlo && members.len() <= options.exact_threshold;
    let result = if exact {
        exact_shapley_subset(&game)?
    } else {
        let samples = options.samples.resolve(members.len());
        monte_carlo_shapley(&game, samples, rng)?
    };
    Ok(CoalitionValuation {
        members,
        values: result.values.clone(),
        result,
    })
}
