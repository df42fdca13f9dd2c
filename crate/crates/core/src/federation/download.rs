use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClientState, ModelPool};

/// Order in which non-negative candidates fill the `k` download slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationPolicy {
    /// Peers never evaluated come first, then evaluated peers by relevance.
    /// Every peer is tried within `ceil((n - 1) / k)` rounds.
    #[default]
    UnseenFirst,
    /// Highest relevance first; never-evaluated peers (relevance 0) only
    /// break ties against peers evaluated at exactly 0.
    RelevanceFirst,
}

/// Peers a client downloads this round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownloadPlan {
    /// Chosen peer ids, in rank order. Never contains the client itself.
    pub chosen: Vec<usize>,
    pub k_nominal: usize,
    pub k_eff: usize,
}

impl DownloadPlan {
    /// No peer survived; the client keeps its own model this round.
    pub fn is_fallback(&self) -> bool {
        self.chosen.is_empty()
    }
}

/// Dynamic top-k: candidates are the other pool members with non-negative
/// relevance; at most `k` of them are taken in policy order, with uniform
/// random tie-breaking.
pub fn select_downloads<R: Rng + ?Sized>(
    state: &ClientState,
    pool: &ModelPool,
    k: usize,
    policy: ExplorationPolicy,
    rng: &mut R,
) -> DownloadPlan {
    let mut candidates: Vec<(usize, f64, bool, u64)> = pool
        .ids()
        .filter(|&j| j != state.id && state.relevance[j] >= 0.0)
        .map(|j| {
            (
                j,
                state.relevance[j],
                state.evaluated[j],
                rng.random::<u64>(),
            )
        })
        .collect();

    match policy {
        ExplorationPolicy::UnseenFirst => {
            candidates.sort_by(|a, b| a.2.cmp(&b.2).then(b.1.total_cmp(&a.1)).then(a.3.cmp(&b.3)))
        }
        ExplorationPolicy::RelevanceFirst => {
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)))
        }
    }
    candidates.truncate(k);
    let chosen: Vec<usize> = candidates.into_iter().map(|c| c.0).collect();
    DownloadPlan {
        k_eff: chosen.len(),
        k_nominal: k,
        chosen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClientSplit, Dataset};
    use crate::learner::{ArchitectureSpec, ParamVector};
    use crate::rng::seeded;
    use std::collections::BTreeSet;

    fn client(id: usize, n: usize) -> ClientState {
        let ds = Dataset::new(vec![0.0], vec![0], 1, 2).unwrap();
        let split = ClientSplit {
            train: ds.clone(),
            validation: ds.clone(),
            test: ds,
        };
        ClientState::new(
            id,
            n,
            ParamVector::zeros(ArchitectureSpec::linear(1, 2).unwrap()),
            split,
        )
    }

    fn full_pool(n: usize) -> ModelPool {
        let mut pool = ModelPool::new(1);
        for i in 0..n {
            pool.uploads.insert(
                i,
                ParamVector::zeros(ArchitectureSpec::linear(1, 2).unwrap()),
            );
        }
        pool
    }

    #[test]
    fn first_round_is_uniform_random_subset() {
        let n = 10;
        let state = client(3, n);
        let pool = full_pool(n);
        let mut counts = [0usize; 10];
        for seed in 0..2000 {
            let plan = select_downloads(
                &state,
                &pool,
                5,
                ExplorationPolicy::RelevanceFirst,
                &mut seeded(seed),
            );
            assert_eq!(plan.k_eff, 5);
            let distinct: BTreeSet<usize> = plan.chosen.iter().copied().collect();
            assert_eq!(distinct.len(), 5);
            assert!(!distinct.contains(&3));
            for j in plan.chosen {
                counts[j] += 1;
            }
        }
        // each of the 9 peers expected 2000 * 5/9 ~ 1111 times
        for (j, &c) in counts.iter().enumerate() {
            if j != 3 {
                assert!((1000..1230).contains(&c), "peer {j}: {c}");
            }
        }
    }

    #[test]
    fn only_non_negative_relevance_survives() {
        let n = 10;
        let mut state = client(0, n);
        state.relevance = vec![-0.1; n];
        state.relevance[4] = 0.3;
        state.relevance[7] = 0.1;
        state.evaluated = vec![true; n];
        for policy in [
            ExplorationPolicy::UnseenFirst,
            ExplorationPolicy::RelevanceFirst,
        ] {
            let plan = select_downloads(&state, &full_pool(n), 5, policy, &mut seeded(0));
            assert_eq!(plan.chosen, vec![4, 7]);
            assert_eq!(plan.k_eff, 2);
            assert_eq!(plan.k_nominal, 5);
        }
    }

    #[test]
    fn all_negative_gives_empty_plan() {
        let n = 4;
        let mut state = client(1, n);
        state.relevance = vec![-0.5; n];
        state.relevance[1] = 0.9; // own entry is ignored
        let plan = select_downloads(
            &state,
            &full_pool(n),
            3,
            ExplorationPolicy::UnseenFirst,
            &mut seeded(0),
        );
        assert!(plan.is_fallback());
        assert_eq!(plan.k_eff, 0);
    }

    #[test]
    fn unseen_peers_beat_evaluated_zero() {
        let n = 6;
        let mut state = client(0, n);
        state.evaluated[1] = true; // relevance exactly 0 after evaluation
        state.evaluated[2] = true;
        state.relevance[2] = 0.4;
        let plan = select_downloads(
            &state,
            &full_pool(n),
            4,
            ExplorationPolicy::RelevanceFirst,
            &mut seeded(1),
        );
        assert_eq!(plan.chosen[0], 2);
        assert!(!plan.chosen.contains(&1));
        let plan = select_downloads(
            &state,
            &full_pool(n),
            3,
            ExplorationPolicy::UnseenFirst,
            &mut seeded(1),
        );
        let set: BTreeSet<usize> = plan.chosen.into_iter().collect();
        assert_eq!(set, BTreeSet::from([3, 4, 5]));
    }

    #[test]
    fn only_pool_members_are_candidates() {
        let n = 6;
        let state = client(0, n);
        let mut pool = full_pool(n);
        pool.uploads.remove(&2);
        pool.uploads.remove(&5);
        let plan = select_downloads(
            &state,
            &pool,
            5,
            ExplorationPolicy::UnseenFirst,
            &mut seeded(2),
        );
        let set: BTreeSet<usize> = plan.chosen.into_iter().collect();
        assert_eq!(set, BTreeSet::from([1, 3, 4]));
    }
}
