use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Coalition, CoalitionGame, ShapleyError, ShapleyMethod, ShapleyResult};

/// Estimates Shapley values from `samples` join orders drawn uniformly with
/// replacement.
///
/// Orders are drawn serially from `rng`; the distinct prefixes they visit
/// are then evaluated (possibly in parallel) and the marginal contributions
/// are summed in draw order, so the result depends only on the seed.
pub fn monte_carlo_shapley<R: Rng + ?Sized>(
    game: &CoalitionGame<'_>,
    samples: usize,
    rng: &mut R,
) -> Result<ShapleyResult, ShapleyError> {
    if samples == 0 {
        return Err(ShapleyError::NoSamples);
    }
    let m = game.num_players();
    let before = game.utility_eval_count();

    let orders: Vec<Vec<usize>> = (0..samples)
        .map(|_| {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(rng);
            order
        })
        .collect();

    let mut prefixes = BTreeSet::new();
    for order in &orders {
        let mut prefix = Coalition::EMPTY;
        for &p in order {
            prefix = prefix.with(p);
            prefixes.insert(prefix);
        }
    }
    game.prefetch(&prefixes.into_iter().collect::<Vec<_>>());

    let mut totals = vec![0.0; m];
    for order in &orders {
        let mut prefix = Coalition::EMPTY;
        let mut prev = 0.0;
        for &p in order {
            prefix = prefix.with(p);
            let cur = game.value(prefix);
            totals[p] += cur - prev;
            prev = cur;
        }
    }

    let r = samples as f64;
    Ok(ShapleyResult {
        values: totals.into_iter().map(|t| t / r).collect(),
        method: ShapleyMethod::MonteCarlo,
        samples_used: samples,
        utility_evaluations: game.utility_eval_count() - before,
    })
}
