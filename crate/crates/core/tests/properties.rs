use std::fs;

use pfedsv_core::harness::{build_inputs, run_single};
use pfedsv_core::learner::{init_params, weighted_aggregate};
use pfedsv_core::rng::seeded;
use pfedsv_core::shapley::exact_shapley_subset;
use pfedsv_core::{Algorithm, ArchitectureSpec, CoalitionGame, ExperimentConfig};
use proptest::prelude::*;

fn shapley(table: &[f64]) -> Vec<f64> {
    exact_shapley_subset(&CoalitionGame::from_table(table.to_vec()).unwrap())
        .unwrap()
        .values
}

fn table(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1 << m).prop_map(|mut t| {
        t[0] = 0.0;
        t
    })
}

fn game_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|m| (table(m), table(m)))
}

proptest! {
    #[test]
    fn shapley_is_additive((v, w) in game_pair(), a in -3.0..3.0f64) {
        let mix: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + y).collect();
        let lhs = shapley(&mix);
        for ((l, x), y) in lhs.iter().zip(shapley(&v)).zip(shapley(&w)) {
            prop_assert!((l - (a * x + y)).abs() < 1e-9);
        }
    }

    #[test]
    fn relabelling_players_permutes_values(v in (2usize..=6).prop_flat_map(table)) {
        // swap players 0 and 1
        let swap = |mask: usize| {
            let (b0, b1) = (mask & 1, (mask >> 1) & 1);
            (mask & !0b11) | (b0 << 1) | b1
        };
        let swapped: Vec<f64> = (0..v.len()).map(|mask| v[swap(mask)]).collect();
        let (a, b) = (shapley(&v), shapley(&swapped));
        prop_assert!((a[0] - b[1]).abs() < 1e-12);
        prop_assert!((a[1] - b[0]).abs() < 1e-12);
        for p in 2..a.len() {
            prop_assert!((a[p] - b[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_ignores_member_order(seed in any::<u64>(), n in 1usize..7, rot in 0usize..7) {
        let arch = ArchitectureSpec::mlp(4, 5, 3).unwrap();
        let mut rng = seeded(seed);
        let models: Vec<_> = (0..n).map(|_| init_params(&arch, &mut rng)).collect();
        let raw: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
        let total: f64 = raw.iter().sum();
        let mut members: Vec<_> = models.iter().zip(raw.iter().map(|r| r / total)).collect();
        let a = weighted_aggregate(&members).unwrap();
        members.rotate_left(rot % n);
        members.reverse();
        let b = weighted_aggregate(&members).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }
}

const SMALL: &str = "algorithm = pfedsv
dataset = synth
synth.classes = 3
synth.dim = 4
synth.per_class = 30
clients = 3
rounds = 3
local_epochs = 1
";

#[test]
fn summary_mta_matches_rounds_csv() {
    let config = ExperimentConfig::parse(SMALL).unwrap();
    let (ds, _, _) = build_inputs(&config, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_single(&config, Algorithm::PFedSv, 0, &ds, dir.path()).unwrap();

    let csv = fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
    let last: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == "3")
        .map(|f| f[3].parse().unwrap())
        .collect();
    assert_eq!(last.len(), 3);
    let recomputed = last.iter().sum::<f64>() / 3.0;

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let reported = json["run"]["final_mta"].as_f64().unwrap();
    assert!((reported - recomputed).abs() < 1e-9);
    assert_eq!(summary.final_mta, Some(reported));
}

#[test]
fn heatmaps_are_square_per_client() {
    let config = ExperimentConfig::parse(SMALL).unwrap();
    let (ds, _, _) = build_inputs(&config, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_single(&config, Algorithm::PFedSv, 1, &ds, dir.path()).unwrap();
    for name in ["relevance_final.csv", "relevance_truth.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let rows: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
        assert_eq!(rows, [3, 3, 3], "{name}");
    }
    let truth = fs::read_to_string(dir.path().join("relevance_truth.csv")).unwrap();
    assert!(truth
        .lines()
        .flat_map(|l| l.split(','))
        .all(|c| c == "0" || c == "1"));
}
