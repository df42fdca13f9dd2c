use serde::{Deserialize, Serialize};

use super::{FederationError, ModelPool};
use crate::learner::{param_distance, DistanceMetric};

/// Distances below this are treated as this value, so a peer identical to
/// the client cannot produce an infinite weight.
pub const MIN_DISTANCE: f64 = 1e-12;

/// Additive guard in the pairwise-similarity baseline, `1 / (d + eps)`.
pub const PAIRWISE_DISTANCE_EPS: f64 = 1e-6;
/// Distance the pairwise-similarity baseline assigns to the client itself.
pub const PAIRWISE_SELF_DISTANCE: f64 = 0.5;

/// Aggregation weights of one client in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationRecord {
    pub members: Vec<usize>,
    /// Shapley value per member (empty for baselines that do not compute
    /// any).
    pub shapley: Vec<f64>,
    pub raw_weights: Vec<f64>,
    /// Normalized weights: non-negative, summing to one.
    pub weights: Vec<f64>,
    /// Set when no member had positive raw weight and the client kept its
    /// own model.
    pub fallback: bool,
}

/// Smoothed relevance: `r_j <- alpha * r_j + (1 - alpha) * sv_j` for every
/// coalition member; everyone else is left alone.
pub fn update_relevance(relevance: &mut [f64], members: &[usize], values: &[f64], alpha_ema: f64) {
    for (&j, &sv) in members.iter().zip(values) {
        relevance[j] = alpha_ema * relevance[j] + (1.0 - alpha_ema) * sv;
    }
}

/// Weights `max(sv_j, 0) / dist(theta_self, theta_j)`, normalized to sum to
/// one.
///
/// The client's own distance is zero, so its term divides by the mean
/// distance of the peers with a positive numerator instead (1.0 when there
/// are none). If every numerator is zero the client keeps its own model.
pub fn compute_weights(
    client: usize,
    members: &[usize],
    values: &[f64],
    pool: &ModelPool,
    metric: DistanceMetric,
) -> Result<AggregationRecord, FederationError> {
    let own = pool
        .get(client)
        .ok_or_else(|| FederationError::Config(format!("client {client} has no upload")))?;
    let mut distances = vec![0.0; members.len()];
    for (d, &j) in distances.iter_mut().zip(members) {
        if j != client {
            let peer = pool
                .get(j)
                .ok_or_else(|| FederationError::Config(format!("client {j} has no upload")))?;
            *d = param_distance(own, peer, metric)?.max(MIN_DISTANCE);
        }
    }

    let positive_peer_distances: Vec<f64> = members
        .iter()
        .zip(values)
        .zip(&distances)
        .filter(|((&j, &sv), _)| j != client && sv > 0.0)
        .map(|(_, &d)| d)
        .collect();
    let self_distance = if positive_peer_distances.is_empty() {
        1.0
    } else {
        positive_peer_distances.iter().sum::<f64>() / positive_peer_distances.len() as f64
    };

    let raw_weights: Vec<f64> = members
        .iter()
        .zip(values)
        .zip(&distances)
        .map(|((&j, &sv), &d)| {
            let d = if j == client { self_distance } else { d };
            sv.max(0.0) / d
        })
        .collect();
    let total: f64 = raw_weights.iter().sum();

    let (weights, fallback) = if total > 0.0 && total.is_finite() {
        (raw_weights.iter().map(|w| w / total).collect(), false)
    } else {
        let one_hot = members
            .iter()
            .map(|&j| if j == client { 1.0 } else { 0.0 })
            .collect();
        (one_hot, true)
    };
    Ok(AggregationRecord {
        members: members.to_vec(),
        shapley: values.to_vec(),
        raw_weights,
        weights,
        fallback,
    })
}

/// Pairwise-similarity baseline: every pool model weighted by
/// `1 / (dist + eps)`, the client itself by `1 / PAIRWISE_SELF_DISTANCE`.
pub(crate) fn pairwise_weights(
    client: usize,
    pool: &ModelPool,
    metric: DistanceMetric,
) -> Result<AggregationRecord, FederationError> {
    let own = pool
        .get(client)
        .ok_or_else(|| FederationError::Config(format!("client {client} has no upload")))?;
    let members: Vec<usize> = pool.ids().collect();
    let raw_weights = members
        .iter()
        .map(|&j| {
            if j == client {
                Ok(1.0 / PAIRWISE_SELF_DISTANCE)
            } else {
                let d = param_distance(own, &pool.uploads[&j], metric)?;
                Ok(1.0 / (d + PAIRWISE_DISTANCE_EPS))
            }
        })
        .collect::<Result<Vec<f64>, FederationError>>()?;
    let total: f64 = raw_weights.iter().sum();
    Ok(AggregationRecord {
        weights: raw_weights.iter().map(|w| w / total).collect(),
        members,
        shapley: Vec::new(),
        raw_weights,
        fallback: false,
    })
}
