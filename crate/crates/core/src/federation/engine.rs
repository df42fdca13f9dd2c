use std::time::Instant;

use rayon::prelude::*;

use super::report::{ClientRoundEntry, RoundReport};
use super::valuation::{evaluate_coalition, ValuationOptions};
use super::weights::{compute_weights, pairwise_weights, update_relevance, AggregationRecord};
use super::{
    client_participation_sampler, select_downloads, Algorithm, ClientState, FederationConfig,
    FederationError, ModelPool,
};
use crate::data::{split_client, Dataset, PartitionSpec};
use crate::learner::{
    accuracy, add_gaussian_noise, average_params, init_params, local_train, weighted_aggregate,
    ArchitectureSpec, ParamVector,
};
use crate::rng::{stream, tag};

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub algorithm: Algorithm,
    pub reports: Vec<RoundReport>,
    pub clients: Vec<ClientState>,
}

impl RunOutcome {
    /// MTA of the last round, or `None` for a zero-round run.
    pub fn final_mta(&self) -> Option<f64> {
        self.reports.last().map(|r| r.mta)
    }

    /// Row `i` holds client `i`'s relevance score for every peer.
    pub fn relevance_matrix(&self) -> Vec<Vec<f64>> {
        self.clients.iter().map(|c| c.relevance.clone()).collect()
    }

    /// Every aggregation performed during the run.
    pub fn aggregation_records(&self) -> impl Iterator<Item = &ClientRoundEntry> {
        self.reports
            .iter()
            .flat_map(|r| &r.clients)
            .filter(|e| !e.weights.is_empty())
    }
}

/// Round-by-round simulator state.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: FederationConfig,
    clients: Vec<ClientState>,
    /// Shared model of the FedAvg baselines.
    global: ParamVector,
    round: usize,
}

struct Trained {
    id: usize,
    local: ParamVector,
    upload: ParamVector,
}

impl Simulation {
    /// Splits each client's slice; every client starts from the same
    /// server-drawn initialization.
    pub fn new(
        config: FederationConfig,
        dataset: &Dataset,
        partition: &PartitionSpec,
        arch: ArchitectureSpec,
    ) -> Result<Self, FederationError> {
        config.validate()?;
        arch.validate()?;
        if partition.num_clients() != config.num_clients {
            return Err(FederationError::Config(format!(
                "partition has {} clients but num_clients is {}",
                partition.num_clients(),
                config.num_clients
            )));
        }
        if arch.input_dim != dataset.dim() || arch.num_classes < dataset.class_count() {
            return Err(FederationError::Config(format!(
                "architecture expects {} features and {} classes; dataset has {} and {}",
                arch.input_dim,
                arch.num_classes,
                dataset.dim(),
                dataset.class_count()
            )));
        }
        let seed = config.seed;
        let init = init_params(&arch, &mut stream(seed, &[tag::INIT]));
        let clients = partition
            .client_indices
            .iter()
            .enumerate()
            .map(|(i, idx)| {
                let slice = dataset.subset(idx);
                let split = split_client(
                    &slice,
                    config.val_frac,
                    config.test_frac,
                    &mut stream(seed, &[tag::SPLIT, i as u64]),
                )?;
                Ok(ClientState::new(i, config.num_clients, init.clone(), split))
            })
            .collect::<Result<Vec<_>, FederationError>>()?;
        Ok(Simulation {
            config,
            clients,
            global: init,
            round: 0,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn run(mut self, algorithm: Algorithm) -> Result<RunOutcome, FederationError> {
        let mut reports = Vec::with_capacity(self.config.rounds);
        for _ in 0..self.config.rounds {
            reports.push(self.step(algorithm)?);
        }
        Ok(RunOutcome {
            algorithm,
            reports,
            clients: self.clients,
        })
    }

    /// Plays one round of `algorithm`.
    pub fn step(&mut self, algorithm: Algorithm) -> Result<RoundReport, FederationError> {
        let started = Instant::now();
        let t = self.round + 1;
        let participants = client_participation_sampler(
            self.config.num_clients,
            self.config.participation,
            &mut stream(self.config.seed, &[tag::PARTICIPATION, t as u64]),
        );
        let from_global = matches!(algorithm, Algorithm::FedAvg | Algorithm::FedAvgFt);
        let trained = self.train(&participants, t, from_global)?;
        let mut pool = ModelPool::new(t);
        for tr in &trained {
            pool.uploads.insert(tr.id, tr.upload.clone());
        }

        let entries = match algorithm {
            Algorithm::Separate => {
                for tr in trained {
                    self.clients[tr.id].params = tr.local;
                }
                self.test_all(&participants)?
            }
            Algorithm::FedAvg | Algorithm::FedAvgFt => {
                let uploads: Vec<&ParamVector> = pool.uploads.values().collect();
                self.global = average_params(&uploads)?;
                self.finish_global(&participants, t, algorithm == Algorithm::FedAvgFt)?
            }
            Algorithm::PairwiseSim => {
                let records = self
                    .clients
                    .par_iter()
                    .filter(|c| pool.get(c.id).is_some())
                    .map(|c| pairwise_weights(c.id, &pool, self.config.distance).map(|r| (c.id, r)))
                    .collect::<Result<Vec<_>, _>>()?;
                for (id, record) in &records {
                    self.clients[*id].params = aggregate(record, &pool)?;
                }
                let mut entries = self.test_all(&participants)?;
                for (id, record) in records {
                    fill_entry(&mut entries[id], record, 0);
                }
                entries
            }
            Algorithm::PFedSv => self.personalize(&pool, t)?,
        };
        self.round = t;
        Ok(RoundReport::new(
            t,
            entries,
            started.elapsed().as_secs_f64() * 1e3,
        ))
    }

    fn train(
        &self,
        participants: &[usize],
        t: usize,
        from_global: bool,
    ) -> Result<Vec<Trained>, FederationError> {
        let seed = self.config.seed;
        participants
            .par_iter()
            .map(|&i| {
                let c = &self.clients[i];
                let start = if from_global { &self.global } else { &c.params };
                let tags = |purpose| [purpose, i as u64, t as u64];
                let local = local_train(
                    start,
                    &c.split.train.batch(),
                    &self.config.train,
                    &mut stream(seed, &tags(tag::TRAIN)),
                )?;
                let upload = add_gaussian_noise(
                    &local,
                    self.config.noise_sigma,
                    &mut stream(seed, &tags(tag::NOISE)),
                )?;
                Ok(Trained {
                    id: i,
                    local,
                    upload,
                })
            })
            .collect()
    }

    /// Test accuracy of every client's current model.
    fn test_all(&self, participants: &[usize]) -> Result<Vec<ClientRoundEntry>, FederationError> {
        self.clients
            .par_iter()
            .map(|c| {
                let mut entry =
                    ClientRoundEntry::idle(c.id, accuracy(&c.params, &c.split.test.batch())?);
                entry.participated = participants.binary_search(&c.id).is_ok();
                Ok(entry)
            })
            .collect()
    }

    /// Every client adopts the global model, optionally fine-tuned on its own
    /// training rows; the next round restarts from the untuned global model.
    fn finish_global(
        &mut self,
        participants: &[usize],
        t: usize,
        fine_tune: bool,
    ) -> Result<Vec<ClientRoundEntry>, FederationError> {
        let seed = self.config.seed;
        let global = &self.global;
        let train = &self.config.train;
        self.clients.par_iter_mut().try_for_each(|c| {
            c.params = if fine_tune {
                let mut rng = stream(seed, &[tag::FINETUNE, c.id as u64, t as u64]);
                local_train(global, &c.split.train.batch(), train, &mut rng)?
            } else {
                global.clone()
            };
            Ok::<_, FederationError>(())
        })?;
        self.test_all(participants)
    }

    /// Download selection, Shapley valuation, relevance update and weighted
    /// aggregation for every participant.
    fn personalize(
        &mut self,
        pool: &ModelPool,
        t: usize,
    ) -> Result<Vec<ClientRoundEntry>, FederationError> {
        let config = &self.config;
        let options = ValuationOptions {
            samples: config.samples,
            exact_threshold: config.exact_threshold,
            force_monte_carlo: config.force_monte_carlo,
        };
        self.clients
            .par_iter_mut()
            .map(|c| {
                if pool.get(c.id).is_none() {
                    let acc = accuracy(&c.params, &c.split.test.batch())?;
                    return Ok(ClientRoundEntry::idle(c.id, acc));
                }
                let tags = |purpose| [purpose, c.id as u64, t as u64];
                let plan = select_downloads(
                    c,
                    pool,
                    config.k,
                    config.exploration,
                    &mut stream(config.seed, &tags(tag::SELECT)),
                );
                let valuation = evaluate_coalition(
                    c.id,
                    &c.split.validation,
                    &plan,
                    pool,
                    &options,
                    &mut stream(config.seed, &tags(tag::SHAPLEY)),
                )?;
                update_relevance(
                    &mut c.relevance,
                    &valuation.members,
                    &valuation.values,
                    config.alpha_ema,
                );
                for &j in &plan.chosen {
                    c.mark_evaluated(j, t);
                }
                let record = compute_weights(
                    c.id,
                    &valuation.members,
                    &valuation.values,
                    pool,
                    config.distance,
                )?;
                c.params = aggregate(&record, pool)?;

                let mut entry =
                    ClientRoundEntry::idle(c.id, accuracy(&c.params, &c.split.test.batch())?);
                entry.participated = true;
                fill_entry(&mut entry, record, plan.k_eff);
                Ok(entry)
            })
            .collect()
    }
}

fn aggregate(record: &AggregationRecord, pool: &ModelPool) -> Result<ParamVector, FederationError> {
    let members: Vec<(&ParamVector, f64)> = record
        .members
        .iter()
        .zip(&record.weights)
        .map(|(&j, &w)| (&pool.uploads[&j], w))
        .collect();
    Ok(weighted_aggregate(&members)?)
}

fn fill_entry(entry: &mut ClientRoundEntry, record: AggregationRecord, k_eff: usize) {
    entry.k_eff = k_eff;
    entry.coalition = record.members;
    entry.shapley = record.shapley;
    entry.weights = record.weights;
    entry.fallback = record.fallback;
}

/// Runs the Shapley-driven personalized federation for `config.rounds`
/// rounds.
pub fn run_pfedsv(
    config: &FederationConfig,
    dataset: &Dataset,
    partition: &PartitionSpec,
    arch: ArchitectureSpec,
) -> Result<RunOutcome, FederationError> {
    Simulation::new(config.clone(), dataset, partition, arch)?.run(Algorithm::PFedSv)
}

/// Runs one of the comparison baselines.
pub fn run_baseline(
    algorithm: Algorithm,
    config: &FederationConfig,
    dataset: &Dataset,
    partition: &PartitionSpec,
    arch: ArchitectureSpec,
) -> Result<RunOutcome, FederationError> {
    if algorithm == Algorithm::PFedSv {
        return Err(FederationError::Config(
            "pfedsv is not a baseline; use run_pfedsv".into(),
        ));
    }
    Simulation::new(config.clone(), dataset, partition, arch)?.run(algorithm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition_pathological, synth_blobs};
    use crate::rng::seeded;

    fn setup(n: usize, classes: usize) -> (Dataset, PartitionSpec, ArchitectureSpec) {
        let ds = synth_blobs(
            classes,
            4,
            30 * n / classes.max(1) + 30,
            0.1,
            &mut seeded(5),
        )
        .unwrap();
        let part = partition_pathological(&ds, n, 2.min(classes), &mut seeded(6)).unwrap();
        let arch = ArchitectureSpec::linear(4, classes).unwrap();
        (ds, part, arch)
    }

    fn config(n: usize, rounds: usize) -> FederationConfig {
        FederationConfig {
            num_clients: n,
            rounds,
            train: crate::learner::TrainConfig {
                epochs: 2,
                lr: 0.1,
                batch_size: 16,
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_rounds_returns_initial_state() {
        let (ds, part, arch) = setup(4, 4);
        let out = run_pfedsv(&config(4, 0), &ds, &part, arch).unwrap();
        assert!(out.reports.is_empty());
        assert_eq!(out.final_mta(), None);
        assert_eq!(out.clients.len(), 4);
        assert!(out
            .clients
            .iter()
            .all(|c| c.relevance.iter().all(|&r| r == 0.0)));
        assert!(out
            .clients
            .iter()
            .all(|c| c.params == out.clients[0].params));
    }

    #[test]
    fn single_client_is_local_training() {
        let (ds, part, arch) = setup(1, 2);
        let cfg = config(1, 3);
        let pf = run_pfedsv(&cfg, &ds, &part, arch).unwrap();
        let sep = run_baseline(Algorithm::Separate, &cfg, &ds, &part, arch).unwrap();
        for (a, b) in pf.reports.iter().zip(&sep.reports) {
            assert_eq!(a.clients[0].k_eff, 0);
            assert_eq!(a.mta, b.mta);
        }
        assert_eq!(pf.clients[0].params, sep.clients[0].params);
        let fedavg = run_baseline(Algorithm::FedAvg, &cfg, &ds, &part, arch).unwrap();
        assert_eq!(fedavg.clients[0].params, sep.clients[0].params);
        for (a, b) in fedavg.reports.iter().zip(&sep.reports) {
            assert_eq!(a.mta, b.mta);
        }
    }

    #[test]
    fn reports_are_reproducible_and_consistent() {
        let (ds, part, arch) = setup(6, 6);
        let cfg = config(6, 3);
        let a = run_pfedsv(&cfg, &ds, &part, arch).unwrap();
        let b = run_pfedsv(&cfg, &ds, &part, arch).unwrap();
        assert_eq!(a.relevance_matrix(), b.relevance_matrix());
        for (x, y) in a.reports.iter().zip(&b.reports) {
            assert_eq!(x.clients, y.clients);
            let mean = x.accuracies().iter().sum::<f64>() / 6.0;
            assert!((x.mta - mean).abs() < 1e-12);
        }
        for e in a.aggregation_records() {
            assert!((e.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(e.coalition[0], e.client);
            assert_eq!(e.coalition.len(), e.k_eff + 1);
        }
    }

    #[test]
    fn first_round_downloads_k_peers() {
        let (ds, part, arch) = setup(8, 8);
        let out = run_pfedsv(&config(8, 1), &ds, &part, arch).unwrap();
        for e in &out.reports[0].clients {
            assert_eq!(e.k_eff, 5);
            assert_eq!(
                out.clients[e.client]
                    .evaluated
                    .iter()
                    .filter(|&&v| v)
                    .count(),
                5
            );
        }
    }

    #[test]
    fn partial_participation_leaves_others_untouched() {
        let (ds, part, arch) = setup(10, 10);
        let cfg = FederationConfig {
            participation: 0.3,
            ..config(10, 1)
        };
        let sim = Simulation::new(cfg, &ds, &part, arch).unwrap();
        let before: Vec<ParamVector> = sim.clients().iter().map(|c| c.params.clone()).collect();
        let out = sim.run(Algorithm::PFedSv).unwrap();
        let report = &out.reports[0];
        assert_eq!(report.clients.iter().filter(|e| e.participated).count(), 3);
        for e in &report.clients {
            if e.participated {
                assert!(e.coalition.iter().all(|j| report.clients[*j].participated));
                assert!(e.k_eff <= 2);
            } else {
                assert_eq!(out.clients[e.client].params, before[e.client]);
            }
        }
    }

    #[test]
    fn pairwise_and_fine_tune_baselines_run() {
        let (ds, part, arch) = setup(4, 4);
        let cfg = config(4, 2);
        let pw = run_baseline(Algorithm::PairwiseSim, &cfg, &ds, &part, arch).unwrap();
        for e in pw.aggregation_records() {
            assert_eq!(e.coalition.len(), 4);
            assert!(e.shapley.is_empty());
        }
        let ft = run_baseline(Algorithm::FedAvgFt, &cfg, &ds, &part, arch).unwrap();
        assert_eq!(ft.reports.len(), 2);
        assert!(run_baseline(Algorithm::PFedSv, &cfg, &ds, &part, arch).is_err());
    }

    #[test]
    fn mismatched_partition_is_rejected() {
        let (ds, part, arch) = setup(4, 4);
        assert!(Simulation::new(config(5, 1), &ds, &part, arch).is_err());
        let wrong = ArchitectureSpec::linear(3, 4).unwrap();
        assert!(Simulation::new(config(4, 1), &ds, &part, wrong).is_err());
    }
}
