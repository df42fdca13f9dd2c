use serde::{Deserialize, Serialize};

/// What happened to one client in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundEntry {
    pub client: usize,
    pub participated: bool,
    pub test_accuracy: f64,
    /// Peers actually downloaded (pFedSV only; 0 elsewhere).
    pub k_eff: usize,
    /// Aggregation members, the client itself first for pFedSV.
    pub coalition: Vec<usize>,
    pub shapley: Vec<f64>,
    pub weights: Vec<f64>,
    pub fallback: bool,
}

impl ClientRoundEntry {
    pub(crate) fn idle(client: usize, test_accuracy: f64) -> Self {
        ClientRoundEntry {
            client,
            participated: false,
            test_accuracy,
            k_eff: 0,
            coalition: Vec::new(),
            shapley: Vec::new(),
            weights: Vec::new(),
            fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based round index.
    pub round: usize,
    /// One entry per client, ordered by id.
    pub clients: Vec<ClientRoundEntry>,
    /// Mean test accuracy over all clients.
    pub mta: f64,
    pub wall_time_ms: f64,
}

impl RoundReport {
    pub(crate) fn new(round: usize, clients: Vec<ClientRoundEntry>, wall_time_ms: f64) -> Self {
        let mta = mean_accuracy(&clients);
        RoundReport {
            round,
            clients,
            mta,
            wall_time_ms,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.clients.iter().map(|c| c.test_accuracy).collect()
    }
}

pub(crate) fn mean_accuracy(entries: &[ClientRoundEntry]) -> f64 {
    if entries.is_empty() {
        return 0.0;
    }
    entries.iter().map(|c| c.test_accuracy).sum::<f64>() / entries.len() as f64
}
