use std::collections::BTreeMap;

use crate::data::ClientSplit;
use crate::learner::ParamVector;

/// One simulated client.
///
/// Randomness is not stored here: every stochastic step draws from a stream
/// derived from `(master seed, purpose, client id, round)`.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    /// Current model; the personalized aggregate after each round.
    pub params: ParamVector,
    /// Smoothed Shapley score per peer. The own entry is updated but never
    /// used for download selection.
    pub relevance: Vec<f64>,
    /// Whether each peer has been part of one of this client's coalitions.
    pub evaluated: Vec<bool>,
    /// Round in which each peer was first evaluated.
    pub first_evaluated: Vec<Option<usize>>,
    pub split: ClientSplit,
}

impl ClientState {
    pub fn new(id: usize, num_clients: usize, params: ParamVector, split: ClientSplit) -> Self {
        ClientState {
            id,
            params,
            relevance: vec![0.0; num_clients],
            evaluated: vec![false; num_clients],
            first_evaluated: vec![None; num_clients],
            split,
        }
    }

    pub(crate) fn mark_evaluated(&mut self, peer: usize, round: usize) {
        self.evaluated[peer] = true;
        self.first_evaluated[peer].get_or_insert(round);
    }
}

/// Server-side uploads of one round, keyed by client id.
#[derive(Debug, Clone, Default)]
pub struct ModelPool {
    pub round: usize,
    pub uploads: BTreeMap<usize, ParamVector>,
}

impl ModelPool {
    pub fn new(round: usize) -> Self {
        ModelPool {
            round,
            uploads: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: usize) -> Option<&ParamVector> {
        self.uploads.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.uploads.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.uploads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uploads.is_empty()
    }
}
