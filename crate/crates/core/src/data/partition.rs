//! Non-IID assignment of dataset rows to clients.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{DataError, Dataset};

/// Smallest client slice the Dirichlet repair step tops clients up to;
/// three rows is the least a train/validation/test split can use.
pub const MIN_CLIENT_SAMPLES: usize = 3;

const ASSIGNMENT_ATTEMPTS: usize = 200;

/// Disjoint row indices per client and the labels each client holds.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub client_indices: Vec<Vec<usize>>,
    pub label_sets: Vec<BTreeSet<usize>>,
}

impl PartitionSpec {
    fn from_indices(ds: &Dataset, client_indices: Vec<Vec<usize>>) -> Self {
        let label_sets = client_indices
            .iter()
            .map(|idx| idx.iter().map(|&i| ds.labels()[i]).collect())
            .collect();
        PartitionSpec {
            client_indices,
            label_sets,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.client_indices.len()
    }

    /// `truth[i][j]` is true when clients `i != j` share at least one label.
    pub fn relevance_ground_truth(&self) -> Vec<Vec<bool>> {
        let n = self.num_clients();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| i != j && !self.label_sets[i].is_disjoint(&self.label_sets[j]))
                    .collect()
            })
            .collect()
    }

    /// Peers of `client` sharing at least one label.
    pub fn relevant_peers(&self, client: usize) -> Vec<usize> {
        (0..self.num_clients())
            .filter(|&j| j != client && !self.label_sets[client].is_disjoint(&self.label_sets[j]))
            .collect()
    }

    /// `hist[client][label]` row counts.
    pub fn label_histogram(&self, ds: &Dataset) -> Vec<Vec<usize>> {
        self.client_indices
            .iter()
            .map(|idx| {
                let mut counts = vec![0; ds.class_count()];
                for &i in idx {
                    counts[ds.labels()[i]] += 1;
                }
                counts
            })
            .collect()
    }

    /// Mean over clients of the Shannon entropy (nats) of their label
    /// distribution. Empty clients contribute 0.
    pub fn mean_label_entropy(&self, ds: &Dataset) -> f64 {
        let hist = self.label_histogram(ds);
        let total: f64 = hist
            .iter()
            .map(|counts| {
                let n: usize = counts.iter().sum();
                if n == 0 {
                    return 0.0;
                }
                counts
                    .iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| {
                        let p = c as f64 / n as f64;
                        -p * p.ln()
                    })
                    .sum::<f64>()
            })
            .sum();
        total / hist.len() as f64
    }

    /// `client_id,label,count` rows for every client/label pair.
    pub fn write_label_histogram_csv<W: Write>(&self, ds: &Dataset, mut out: W) -> io::Result<()> {
        writeln!(out, "client_id,label,count")?;
        for (client, counts) in self.label_histogram(ds).iter().enumerate() {
            for (label, count) in counts.iter().enumerate() {
                writeln!(out, "{client},{label},{count}")?;
            }
        }
        Ok(())
    }
}

fn split_even(items: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let len = base + usize::from(p < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Label-homogeneous shards: `num_clients * labels_per_client` shards are
/// spread over the classes, and every client receives `labels_per_client`
/// shards of distinct labels.
pub fn partition_pathological<R: Rng + ?Sized>(
    ds: &Dataset,
    num_clients: usize,
    labels_per_client: usize,
    rng: &mut R,
) -> Result<PartitionSpec, DataError> {
    if num_clients == 0 || labels_per_client == 0 {
        return Err(DataError::InfeasiblePartition(
            "need at least one client and one label per client".into(),
        ));
    }
    let by_class = ds.indices_by_class();
    let mut present: Vec<usize> = (0..ds.class_count())
        .filter(|&c| !by_class[c].is_empty())
        .collect();
    if labels_per_client > present.len() {
        return Err(DataError::InfeasiblePartition(format!(
            "{labels_per_client} labels per client but only {} classes present",
            present.len()
        )));
    }

    let num_shards = num_clients * labels_per_client;
    let base = num_shards / present.len();
    let extra = num_shards % present.len();
    present.shuffle(rng);

    // (label, rows) shards
    let mut shards: Vec<(usize, Vec<usize>)> = Vec::with_capacity(num_shards);
    for (rank, &label) in present.iter().enumerate() {
        let count = base + usize::from(rank < extra);
        if count == 0 {
            continue;
        }
        if count > num_clients {
            return Err(DataError::InfeasiblePartition(format!(
                "label {label} needs {count} shards across only {num_clients} clients"
            )));
        }
        let mut rows = by_class[label].clone();
        if rows.len() < count {
            return Err(DataError::InfeasiblePartition(format!(
                "label {label} has {} rows for {count} shards",
                rows.len()
            )));
        }
        rows.shuffle(rng);
        shards.extend(split_even(&rows, count).into_iter().map(|s| (label, s)));
    }

    let owners = assign_shards(&shards, num_clients, labels_per_client, rng);
    let mut client_indices = vec![Vec::new(); num_clients];
    for ((_, rows), owner) in shards.iter().zip(owners) {
        client_indices[owner].extend_from_slice(rows);
    }
    for idx in &mut client_indices {
        idx.sort_unstable();
    }
    Ok(PartitionSpec::from_indices(ds, client_indices))
}

/// Random owner per shard such that each client gets `per_client` shards
/// with distinct labels. Shards arrive grouped by label with at most
/// `num_clients` shards per label.
fn assign_shards<R: Rng + ?Sized>(
    shards: &[(usize, Vec<usize>)],
    num_clients: usize,
    per_client: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..shards.len()).collect();
    'attempt: for _ in 0..ASSIGNMENT_ATTEMPTS {
        order.shuffle(rng);
        let mut owners = vec![usize::MAX; shards.len()];
        let mut held: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_clients];
        for &s in &order {
            let label = shards[s].0;
            let open: Vec<usize> = (0..num_clients)
                .filter(|&c| held[c].len() < per_client && !held[c].contains(&label))
                .collect();
            let Some(&c) = open.choose(rng) else {
                continue 'attempt;
            };
            held[c].insert(label);
            owners[s] = c;
        }
        return owners;
    }
    deal_round_robin(shards.len(), num_clients, rng)
}

/// Deals label-grouped shards round-robin over a shuffled client order. A
/// label's run of at most `num_clients` consecutive shards lands on
/// distinct clients.
fn deal_round_robin<R: Rng + ?Sized>(
    num_shards: usize,
    num_clients: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut clients: Vec<usize> = (0..num_clients).collect();
    clients.shuffle(rng);
    (0..num_shards).map(|p| clients[p % num_clients]).collect()
}

fn dirichlet_sample<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        draws.into_iter().map(|d| d / sum).collect()
    } else {
        // every gamma draw underflowed: all mass on one client
        let mut p = vec![0.0; k];
        p[rng.random_range(0..k)] = 1.0;
        p
    }
}

/// Per-class proportions drawn from `Dir(alpha)` over clients. Clients left
/// with fewer than [`MIN_CLIENT_SAMPLES`] rows take rows from the largest
/// client.
pub fn partition_dirichlet<R: Rng + ?Sized>(
    ds: &Dataset,
    num_clients: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<PartitionSpec, DataError> {
    if num_clients == 0 {
        return Err(DataError::InvalidParameter(
            "need at least one client".into(),
        ));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(DataError::InvalidParameter(format!(
            "dirichlet alpha must be positive, got {alpha}"
        )));
    }
    let mut client_indices = vec![Vec::new(); num_clients];
    for mut rows in ds.indices_by_class() {
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(rng);
        let props = dirichlet_sample(alpha, num_clients, rng);
        let mut cumulative = 0.0;
        let mut start = 0;
        for (client, p) in props.iter().enumerate() {
            cumulative += p;
            let end = if client + 1 == num_clients {
                rows.len()
            } else {
                ((cumulative * rows.len() as f64).round() as usize).clamp(start, rows.len())
            };
            client_indices[client].extend_from_slice(&rows[start..end]);
            start = end;
        }
    }

    while let Some(needy) = (0..num_clients).find(|&c| client_indices[c].len() < MIN_CLIENT_SAMPLES)
    {
        let donor = (0..num_clients)
            .max_by_key(|&c| (client_indices[c].len(), std::cmp::Reverse(c)))
            .expect("at least one client");
        if client_indices[donor].len() <= MIN_CLIENT_SAMPLES {
            break;
        }
        let pick = rng.random_range(0..client_indices[donor].len());
        let row = client_indices[donor].swap_remove(pick);
        client_indices[needy].push(row);
    }

    for idx in &mut client_indices {
        idx.sort_unstable();
    }
    Ok(PartitionSpec::from_indices(ds, client_indices))
}
