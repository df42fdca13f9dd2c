//! Fixtures shared by the benchmarks.

use pfedsv_core::harness::build_inputs;
use pfedsv_core::rng::derive_seed;
use pfedsv_core::{ExperimentConfig, FederationConfig, Simulation};

/// Utility table of an `m`-player game with values in `[0, 1)` and
/// `v(empty) = 0`.
pub fn game_table(m: usize, seed: u64) -> Vec<f64> {
    (0..1u64 << m)
        .map(|mask| match mask {
            0 => 0.0,
            _ => (derive_seed(seed, &[mask]) >> 11) as f64 / (1u64 << 53) as f64,
        })
        .collect()
}

/// A fresh simulation over synthetic blobs, ready for its first round.
pub fn simulation(clients: usize, hidden_dim: Option<usize>) -> Simulation {
    let hidden = hidden_dim.map_or_else(|| "none".to_string(), |h| h.to_string());
    let text = format!(
        "algorithm = pfedsv\ndataset = synth\nsynth.per_class = 100\nclients = {clients}\n\
         hidden_dim = {hidden}\nlocal_epochs = 1\n"
    );
    let config = ExperimentConfig::parse(&text).expect("fixture config is valid");
    let (dataset, partition, arch) = build_inputs(&config, 0).expect("fixture inputs build");
    let federation = FederationConfig {
        seed: 0,
        ..config.federation
    };
    Simulation::new(federation, &dataset, &partition, arch).expect("fixture simulation builds")
}
