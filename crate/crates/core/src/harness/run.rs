use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, PartitionRule};
use super::export::{export_relevance_heatmap, write_rounds_csv};
use super::HarnessError;
use crate::data::idx::{parse_idx_images, parse_idx_labels};
use crate::data::{
    load_idx, partition_dirichlet, partition_pathological, synth_blobs, Dataset, PartitionSpec,
};
use crate::federation::{Algorithm, FederationConfig, Simulation};
use crate::learner::ArchitectureSpec;
use crate::rng::{stream, tag};

/// Environment variable naming the default parent of output directories.
pub const OUTPUT_ROOT_ENV: &str = "PFEDSV_OUTPUT_ROOT";

/// Overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub force: bool,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
}

/// Result of one algorithm on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub rounds: usize,
    /// `None` when no round was played.
    pub final_mta: Option<f64>,
    pub mta_by_round: Vec<f64>,
    pub wall_time_ms: f64,
}

/// Final MTA over the repeats of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub final_mta: Vec<Option<f64>>,
    pub mean_mta: Option<f64>,
    /// Sample standard deviation; `None` with fewer than two values.
    pub std_mta: Option<f64>,
}

impl AlgorithmSummary {
    fn from_runs(algorithm: Algorithm, runs: &[RunSummary]) -> Self {
        let values: Vec<f64> = runs.iter().filter_map(|r| r.final_mta).collect();
        let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
        let std = mean.filter(|_| values.len() > 1).map(|m| {
            let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
            (ss / (values.len() - 1) as f64).sqrt()
        });
        AlgorithmSummary {
            algorithm,
            seeds: runs.iter().map(|r| r.seed).collect(),
            final_mta: runs.iter().map(|r| r.final_mta).collect(),
            mean_mta: mean,
            std_mta: std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub algorithms: Vec<AlgorithmSummary>,
}

/// `--out`, else the config's `output`, else `$PFEDSV_OUTPUT_ROOT/<stem>`,
/// else `runs/<stem>`.
pub fn resolve_output_root(
    explicit: Option<&Path>,
    config: &ExperimentConfig,
    config_path: &Path,
) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.output {
        return dir.clone();
    }
    let stem = config_path
        .file_stem()
        .map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned());
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(stem),
        _ => PathBuf::from("runs").join(stem),
    }
}

/// Creates `dir`, refusing a non-empty one unless `force` is set. Existing
/// files are overwritten, never deleted.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<(), HarnessError> {
    if dir.exists() {
        let mut entries =
            fs::read_dir(dir).map_err(HarnessError::io(format!("reading {}", dir.display())))?;
        if entries.next().is_some() && !force {
            return Err(HarnessError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(HarnessError::io(format!("creating {}", dir.display())))
}

fn load_source(config: &ExperimentConfig, seed: u64) -> Result<Dataset, HarnessError> {
    Ok(match &config.dataset {
        DatasetSource::Synth {
            classes,
            dim,
            per_class,
            spread,
        } => synth_blobs(
            *classes,
            *dim,
            *per_class,
            *spread,
            &mut stream(seed, &[tag::DATASET]),
        )?,
        DatasetSource::Idx { images, labels } => load_idx(images, labels)?,
    })
}

fn partition_for(
    config: &ExperimentConfig,
    dataset: &Dataset,
    seed: u64,
) -> Result<PartitionSpec, HarnessError> {
    let n = config.federation.num_clients;
    let mut rng = stream(seed, &[tag::PARTITION]);
    Ok(match config.partition {
        PartitionRule::Pathological { labels_per_client } => {
            partition_pathological(dataset, n, labels_per_client, &mut rng)?
        }
        PartitionRule::Dirichlet { alpha } => partition_dirichlet(dataset, n, alpha, &mut rng)?,
    })
}

fn architecture_for(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<ArchitectureSpec, HarnessError> {
    let arch = ArchitectureSpec::new(dataset.dim(), config.hidden_dim, dataset.class_count())
        .map_err(crate::federation::FederationError::from)?;
    Ok(arch)
}

/// Dataset, partition and model shape for one seed.
pub fn build_inputs(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(Dataset, PartitionSpec, ArchitectureSpec), HarnessError> {
    let dataset = load_source(config, seed)?;
    let partition = partition_for(config, &dataset, seed)?;
    let arch = architecture_for(config, &dataset)?;
    Ok((dataset, partition, arch))
}

/// Runs `algorithm` once with master seed `seed` and writes its artifacts
/// into `dir`.
pub fn run_single(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    seed: u64,
    dataset: &Dataset,
    dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let partition = partition_for(config, dataset, seed)?;
    let arch = architecture_for(config, dataset)?;
    let federation = FederationConfig {
        seed,
        ..config.federation.clone()
    };
    let outcome = Simulation::new(federation, dataset, &partition, arch)?.run(algorithm)?;

    fs::create_dir_all(dir).map_err(HarnessError::io(format!("creating {}", dir.display())))?;
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(HarnessError::io(format!("creating {}", path.display())))
    };
    write_rounds_csv(&outcome.reports, create("rounds.csv")?)
        .map_err(HarnessError::io("writing rounds.csv"))?;
    export_relevance_heatmap(&outcome.clients, &partition, dir)
        .map_err(HarnessError::io("writing relevance matrices"))?;
    partition
        .write_label_histogram_csv(dataset, create("label_histogram.csv")?)
        .map_err(HarnessError::io("writing label_histogram.csv"))?;
    if config.checkpoint {
        let ckpt = dir.join("checkpoints");
        fs::create_dir_all(&ckpt)
            .map_err(HarnessError::io(format!("creating {}", ckpt.display())))?;
        for c in &outcome.clients {
            let path = ckpt.join(format!("client-{}.params", c.id));
            fs::write(&path, c.params.to_bytes())
                .map_err(HarnessError::io(format!("writing {}", path.display())))?;
        }
    }

    let summary = RunSummary {
        algorithm,
        seed,
        rounds: outcome.reports.len(),
        final_mta: outcome.final_mta(),
        mta_by_round: outcome.reports.iter().map(|r| r.mta).collect(),
        wall_time_ms: outcome.reports.iter().map(|r| r.wall_time_ms).sum(),
    };
    let echo = ExperimentConfig {
        algorithm,
        federation: FederationConfig {
            seed,
            ..config.federation.clone()
        },
        ..config.clone()
    };
    let json = serde_json::json!({ "run": &summary, "config": &echo });
    write_json(&dir.join("summary.json"), &json)?;
    Ok(summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries always serialize");
    text.push('\n');
    fs::write(path, text).map_err(HarnessError::io(format!("writing {}", path.display())))
}

/// Runs every algorithm for seeds `seed..seed + repeats` under
/// `<out>/<algorithm>/seed-<s>/`, then writes `summary.json` and
/// `comparison.csv` at the top level.
pub fn run_experiment(
    config: &ExperimentConfig,
    algorithms: &[Algorithm],
    options: &RunOptions,
) -> Result<ExperimentSummary, HarnessError> {
    let mut config = config.clone();
    if let Some(r) = options.repeats {
        config.repeats = r;
    }
    if let Some(s) = options.seed {
        config.federation.seed = s;
    }
    config.validate()?;
    prepare_output_dir(&options.out_dir, options.force)?;

    let master = config.federation.seed;
    let seeds: Vec<u64> = (0..config.repeats as u64)
        .map(|r| master.wrapping_add(r))
        .collect();
    // an IDX file is the same for every seed; read it once
    let shared = match config.dataset {
        DatasetSource::Idx { .. } => Some(load_source(&config, master)?),
        DatasetSource::Synth { .. } => None,
    };

    let mut per_algorithm: Vec<Vec<RunSummary>> = vec![Vec::new(); algorithms.len()];
    for &seed in &seeds {
        let dataset = match &shared {
            Some(ds) => ds.clone(),
            None => load_source(&config, seed)?,
        };
        for (runs, &algorithm) in per_algorithm.iter_mut().zip(algorithms) {
            let dir = options
                .out_dir
                .join(algorithm.id())
                .join(format!("seed-{seed}"));
            runs.push(run_single(&config, algorithm, seed, &dataset, &dir)?);
        }
    }

    let summary = ExperimentSummary {
        algorithms: algorithms
            .iter()
            .zip(&per_algorithm)
            .map(|(&a, runs)| AlgorithmSummary::from_runs(a, runs))
            .collect(),
        config,
    };
    write_json(&options.out_dir.join("summary.json"), &summary)?;
    let mut csv = String::from("algorithm,repeats,mean_mta,std_mta\n");
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for a in &summary.algorithms {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            a.algorithm,
            a.seeds.len(),
            fmt(a.mean_mta),
            fmt(a.std_mta)
        ));
    }
    let path = options.out_dir.join("comparison.csv");
    fs::write(&path, csv).map_err(HarnessError::io(format!("writing {}", path.display())))?;
    Ok(summary)
}

/// Image geometry and per-class counts of an IDX pair.
pub fn describe_idx(images: &Path, labels: &Path) -> Result<String, HarnessError> {
    let read = |p: &Path| fs::read(p).map_err(HarnessError::io(format!("reading {}", p.display())));
    let imgs = parse_idx_images(&read(images)?)?;
    let labs = parse_idx_labels(&read(labels)?)?;
    let dataset = crate::data::idx::dataset_from_idx(&imgs, &labs)?;
    let mut out = format!(
        "images: {} x {} x {}\nfeatures: {}\nclasses: {}\nlabel counts:\n",
        imgs.count,
        imgs.rows,
        imgs.cols,
        dataset.dim(),
        dataset.class_count()
    );
    for (label, count) in dataset.class_histogram().iter().enumerate() {
        out.push_str(&format!("  {label}: {count}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(algorithm: &str, rounds: usize) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            "algorithm = {algorithm}\ndataset = synth\nclients = 4\nrounds = {rounds}\nsynth.classes = 4\nsynth.dim = 3\nsynth.per_class = 30\nlocal_epochs = 1\nrepeats = 2\n"
        ))
        .unwrap()
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn writes_expected_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let mut config = small("pfedsv", 2);
        config.checkpoint = true;
        let options = RunOptions {
            out_dir: out.clone(),
            ..Default::default()
        };
        let summary =
            run_experiment(&config, &[Algorithm::PFedSv, Algorithm::FedAvg], &options).unwrap();
        assert_eq!(summary.algorithms.len(), 2);
        assert_eq!(summary.algorithms[0].seeds, vec![0, 1]);
        assert!(summary.algorithms[0].std_mta.is_some());
        for algo in ["pfedsv", "fedavg"] {
            for seed in 0..2 {
                let dir = out.join(algo).join(format!("seed-{seed}"));
                for f in [
                    "rounds.csv",
                    "summary.json",
                    "relevance_final.csv",
                    "relevance_truth.csv",
                    "label_histogram.csv",
                ] {
                    assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
                }
                assert!(dir.join("checkpoints/client-3.params").is_file());
            }
        }
        assert!(out.join("summary.json").is_file());
        let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
        assert_eq!(cmp.lines().count(), 3);
        assert!(cmp.lines().nth(1).unwrap().starts_with("pfedsv,2,"));

        let truth = fs::read_to_string(out.join("pfedsv/seed-0/relevance_truth.csv")).unwrap();
        let rows: Vec<Vec<&str>> = truth.lines().map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 4);
        for i in 0..4 {
            assert_eq!(rows[i].len(), 4);
            assert_eq!(rows[i][i], "0");
            for j in 0..4 {
                assert_eq!(rows[i][j], rows[j][i]);
            }
        }
    }

    #[test]
    fn refuses_non_empty_output_without_force() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("keep.txt"), "x").unwrap();
        let config = small("separate", 1);
        let mut options = RunOptions {
            out_dir: tmp.path().to_path_buf(),
            repeats: Some(1),
            ..Default::default()
        };
        let err = run_experiment(&config, &[Algorithm::Separate], &options).unwrap_err();
        assert!(matches!(err, HarnessError::OutputExists(_)));
        assert_eq!(err.exit_code(), 1);
        options.force = true;
        run_experiment(&config, &[Algorithm::Separate], &options).unwrap();
        assert!(tmp.path().join("keep.txt").is_file());
    }

    #[test]
    fn zero_rounds_gives_header_only() {
        let tmp = tempfile::tempdir().unwrap();
        let config = small("pfedsv", 0);
        let options = RunOptions {
            out_dir: tmp.path().join("o"),
            repeats: Some(1),
            ..Default::default()
        };
        let summary = run_experiment(&config, &[Algorithm::PFedSv], &options).unwrap();
        assert_eq!(summary.algorithms[0].mean_mta, None);
        let text = fs::read_to_string(tmp.path().join("o/pfedsv/seed-0/rounds.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn output_root_precedence() {
        let mut config = small("pfedsv", 1);
        let path = Path::new("configs/blobs.conf");
        assert_eq!(
            resolve_output_root(Some(Path::new("x")), &config, path),
            PathBuf::from("x")
        );
        config.output = Some("from-config".into());
        assert_eq!(
            resolve_output_root(None, &config, path),
            PathBuf::from("from-config")
        );
        config.output = None;
        let resolved = resolve_output_root(None, &config, path);
        assert!(resolved.ends_with("blobs"));
    }

    #[test]
    fn sample_std_over_repeats() {
        let run = |seed, mta| RunSummary {
            algorithm: Algorithm::Separate,
            seed,
            rounds: 1,
            final_mta: Some(mta),
            mta_by_round: vec![mta],
            wall_time_ms: 0.0,
        };
        let s = AlgorithmSummary::from_runs(
            Algorithm::Separate,
            &[run(0, 0.5), run(1, 0.7), run(2, 0.9)],
        );
        assert!((s.mean_mta.unwrap() - 0.7).abs() < 1e-12);
        assert!((s.std_mta.unwrap() - 0.2).abs() < 1e-12);
        let single = AlgorithmSummary::from_runs(Algorithm::Separate, &[run(0, 0.5)]);
        assert_eq!(single.std_mta, None);
    }
}
