use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::federation::{Algorithm, ExplorationPolicy, FederationConfig, SampleCount};
use crate::learner::{DistanceMetric, TrainConfig};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synth {
        classes: usize,
        dim: usize,
        per_class: usize,
        spread: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

/// How rows are dealt to clients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionRule {
    Pathological { labels_per_client: usize },
    Dirichlet { alpha: f64 },
}

/// One experiment as described by a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub federation: FederationConfig,
    /// `None` selects the linear softmax model.
    pub hidden_dim: Option<usize>,
    pub dataset: DatasetSource,
    pub partition: PartitionRule,
    pub output: Option<PathBuf>,
    pub repeats: usize,
    pub checkpoint: bool,
}

pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_SYNTH: DatasetSource = DatasetSource::Synth {
    classes: 10,
    dim: 30,
    per_class: 200,
    spread: 0.8,
};
pub const DEFAULT_LABELS_PER_CLIENT: usize = 2;
pub const DEFAULT_DIRICHLET_ALPHA: f64 = 0.5;

const KEYS: &[&str] = &[
    "algorithm",
    "clients",
    "participation",
    "rounds",
    "local_epochs",
    "lr",
    "batch_size",
    "k",
    "mc_samples",
    "alpha_ema",
    "exact_threshold",
    "force_monte_carlo",
    "distance",
    "exploration",
    "hidden_dim",
    "dataset",
    "synth.classes",
    "synth.dim",
    "synth.per_class",
    "synth.spread",
    "idx.images",
    "idx.labels",
    "partition",
    "labels_per_client",
    "dirichlet_alpha",
    "val_frac",
    "test_frac",
    "noise_sigma",
    "seed",
    "output",
    "repeats",
    "checkpoint",
];

const SYNTH_KEYS: &[&str] = &[
    "synth.classes",
    "synth.dim",
    "synth.per_class",
    "synth.spread",
];
const IDX_KEYS: &[&str] = &["idx.images", "idx.labels"];

struct Entries<'a> {
    map: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Entries<'a> {
    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<(usize, &'a str)> {
        self.map.get(key).copied()
    }

    fn parse_with<T>(
        &self,
        key: &str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, value)) => f(value).map(Some).map_err(|message| ConfigError::Parse {
                line,
                key: Some(key.to_string()),
                message,
            }),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.parse_with(key, |v| {
            v.parse::<T>()
                .map_err(|_| format!("cannot parse `{v}` as {}", short_type_name::<T>()))
        })
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)?.ok_or_else(|| missing(key))
    }
}

fn short_type_name<T>() -> &'static str {
    let full = std::any::type_name::<T>();
    full.rsplit("::").next().unwrap_or(full)
}

fn missing(field: &str) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: "required".into(),
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_samples(v: &str) -> Result<SampleCount, String> {
    if v == "auto" {
        return Ok(SampleCount::Auto);
    }
    v.parse()
        .map(SampleCount::Fixed)
        .map_err(|_| format!("expected `auto` or a count, got `{v}`"))
}

fn parse_hidden(v: &str) -> Result<Option<usize>, String> {
    if v == "none" {
        return Ok(None);
    }
    v.parse()
        .map(Some)
        .map_err(|_| format!("expected `none` or a width, got `{v}`"))
}

fn parse_distance(v: &str) -> Result<DistanceMetric, String> {
    match v {
        "l2" => Ok(DistanceMetric::L2),
        "l2sq" => Ok(DistanceMetric::L2Sq),
        _ => Err(format!("expected l2 or l2sq, got `{v}`")),
    }
}

fn parse_exploration(v: &str) -> Result<ExplorationPolicy, String> {
    match v {
        "unseen_first" => Ok(ExplorationPolicy::UnseenFirst),
        "relevance_first" => Ok(ExplorationPolicy::RelevanceFirst),
        _ => Err(format!(
            "expected unseen_first or relevance_first, got `{v}`"
        )),
    }
}

fn tokenize(text: &str) -> Result<Entries<'_>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            key: None,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::Parse {
                line,
                key: Some(key.to_string()),
                message: "unknown key".into(),
            });
        }
        if let Some((first, _)) = map.insert(key, (line, value)) {
            return Err(ConfigError::Parse {
                line,
                key: Some(key.to_string()),
                message: format!("duplicate key (first set on line {first})"),
            });
        }
    }
    Ok(Entries { map })
}

impl ExperimentConfig {
    /// Parses and validates config text. Everything except `algorithm`,
    /// `dataset` and `clients` has a default.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = tokenize(text)?;
        let defaults = FederationConfig::default();

        let algorithm = e
            .parse_with("algorithm", |v| v.parse::<Algorithm>())?
            .ok_or_else(|| missing("algorithm"))?;
        let dataset_kind: String = e.require("dataset")?;
        let dataset = match dataset_kind.as_str() {
            "synth" => {
                if let Some(k) = IDX_KEYS.iter().find(|k| e.has(k)) {
                    return Err(invalid(
                        k,
                        "set, but dataset is synth; use exactly one dataset source",
                    ));
                }
                let DatasetSource::Synth {
                    classes,
                    dim,
                    per_class,
                    spread,
                } = DEFAULT_SYNTH
                else {
                    unreachable!()
                };
                DatasetSource::Synth {
                    classes: e.get("synth.classes")?.unwrap_or(classes),
                    dim: e.get("synth.dim")?.unwrap_or(dim),
                    per_class: e.get("synth.per_class")?.unwrap_or(per_class),
                    spread: e.get("synth.spread")?.unwrap_or(spread),
                }
            }
            "idx" => {
                if let Some(k) = SYNTH_KEYS.iter().find(|k| e.has(k)) {
                    return Err(invalid(
                        k,
                        "set, but dataset is idx; use exactly one dataset source",
                    ));
                }
                DatasetSource::Idx {
                    images: e.require::<PathBuf>("idx.images")?,
                    labels: e.require::<PathBuf>("idx.labels")?,
                }
            }
            other => {
                return Err(invalid(
                    "dataset",
                    format!("expected synth or idx, got `{other}`"),
                ))
            }
        };

        let partition_kind: String = e.get("partition")?.unwrap_or_else(|| "pathological".into());
        let partition = match partition_kind.as_str() {
            "pathological" => {
                if e.has("dirichlet_alpha") {
                    return Err(invalid(
                        "dirichlet_alpha",
                        "set, but partition is pathological; use exactly one partition rule",
                    ));
                }
                PartitionRule::Pathological {
                    labels_per_client: e
                        .get("labels_per_client")?
                        .unwrap_or(DEFAULT_LABELS_PER_CLIENT),
                }
            }
            "dirichlet" => {
                if e.has("labels_per_client") {
                    return Err(invalid(
                        "labels_per_client",
                        "set, but partition is dirichlet; use exactly one partition rule",
                    ));
                }
                PartitionRule::Dirichlet {
                    alpha: e.get("dirichlet_alpha")?.unwrap_or(DEFAULT_DIRICHLET_ALPHA),
                }
            }
            other => {
                return Err(invalid(
                    "partition",
                    format!("expected pathological or dirichlet, got `{other}`"),
                ))
            }
        };

        let federation = FederationConfig {
            num_clients: e.require("clients")?,
            participation: e.get("participation")?.unwrap_or(defaults.participation),
            rounds: e.get("rounds")?.unwrap_or(defaults.rounds),
            train: TrainConfig {
                epochs: e.get("local_epochs")?.unwrap_or(defaults.train.epochs),
                lr: e.get("lr")?.unwrap_or(defaults.train.lr),
                batch_size: e.get("batch_size")?.unwrap_or(defaults.train.batch_size),
            },
            k: e.get("k")?.unwrap_or(defaults.k),
            samples: e
                .parse_with("mc_samples", parse_samples)?
                .unwrap_or(defaults.samples),
            alpha_ema: e.get("alpha_ema")?.unwrap_or(defaults.alpha_ema),
            exact_threshold: e
                .get("exact_threshold")?
                .unwrap_or(defaults.exact_threshold),
            force_monte_carlo: e
                .parse_with("force_monte_carlo", parse_bool)?
                .unwrap_or(defaults.force_monte_carlo),
            distance: e
                .parse_with("distance", parse_distance)?
                .unwrap_or(defaults.distance),
            noise_sigma: e.get("noise_sigma")?.unwrap_or(defaults.noise_sigma),
            exploration: e
                .parse_with("exploration", parse_exploration)?
                .unwrap_or(defaults.exploration),
            val_frac: e.get("val_frac")?.unwrap_or(defaults.val_frac),
            test_frac: e.get("test_frac")?.unwrap_or(defaults.test_frac),
            seed: e.get("seed")?.unwrap_or(defaults.seed),
        };

        let config = ExperimentConfig {
            algorithm,
            federation,
            hidden_dim: e.parse_with("hidden_dim", parse_hidden)?.flatten(),
            dataset,
            partition,
            output: e.get("output")?,
            repeats: e.get("repeats")?.unwrap_or(DEFAULT_REPEATS),
            checkpoint: e.parse_with("checkpoint", parse_bool)?.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Range checks; the error names the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = &self.federation;
        let check = |ok: bool, field: &str, message: String| {
            if ok {
                Ok(())
            } else {
                Err(invalid(field, message))
            }
        };
        check(f.num_clients >= 1, "clients", "must be at least 1".into())?;
        check(
            f.participation > 0.0 && f.participation <= 1.0,
            "participation",
            format!("must be in (0, 1], got {}", f.participation),
        )?;
        check(
            f.train.epochs >= 1,
            "local_epochs",
            "must be at least 1".into(),
        )?;
        check(
            f.train.lr > 0.0 && f.train.lr.is_finite(),
            "lr",
            format!("must be positive and finite, got {}", f.train.lr),
        )?;
        check(
            f.train.batch_size >= 1,
            "batch_size",
            "must be at least 1".into(),
        )?;
        check(f.k >= 1, "k", "must be at least 1".into())?;
        check(
            f.samples != SampleCount::Fixed(0),
            "mc_samples",
            "must be `auto` or at least 1".into(),
        )?;
        check(
            (0.0..=1.0).contains(&f.alpha_ema),
            "alpha_ema",
            format!("must be in [0, 1], got {}", f.alpha_ema),
        )?;
        check(
            f.exact_threshold <= crate::shapley::SUBSET_PLAYER_LIMIT,
            "exact_threshold",
            format!("must be at most {}", crate::shapley::SUBSET_PLAYER_LIMIT),
        )?;
        check(
            f.noise_sigma >= 0.0 && f.noise_sigma.is_finite(),
            "noise_sigma",
            format!("must be finite and non-negative, got {}", f.noise_sigma),
        )?;
        check(
            f.val_frac > 0.0 && f.val_frac < 1.0,
            "val_frac",
            format!("must be in (0, 1), got {}", f.val_frac),
        )?;
        check(
            f.test_frac > 0.0 && f.test_frac < 1.0,
            "test_frac",
            format!("must be in (0, 1), got {}", f.test_frac),
        )?;
        check(
            f.val_frac + f.test_frac < 1.0,
            "test_frac",
            format!(
                "val_frac + test_frac must be below 1, got {}",
                f.val_frac + f.test_frac
            ),
        )?;
        check(
            self.hidden_dim != Some(0),
            "hidden_dim",
            "must be `none` or at least 1".into(),
        )?;
        check(self.repeats >= 1, "repeats", "must be at least 1".into())?;
        if let DatasetSource::Synth {
            classes,
            dim,
            per_class,
            spread,
        } = self.dataset
        {
            check(
                classes >= 2,
                "synth.classes",
                format!("must be at least 2, got {classes}"),
            )?;
            check(dim >= 1, "synth.dim", "must be at least 1".into())?;
            check(
                per_class >= 1,
                "synth.per_class",
                "must be at least 1".into(),
            )?;
            check(
                spread >= 0.0 && spread.is_finite(),
                "synth.spread",
                format!("must be finite and non-negative, got {spread}"),
            )?;
            if let PartitionRule::Pathological { labels_per_client } = self.partition {
                check(
                    labels_per_client <= classes,
                    "labels_per_client",
                    format!("{labels_per_client} exceeds the {classes} classes"),
                )?;
            }
        }
        match self.partition {
            PartitionRule::Pathological { labels_per_client } => check(
                labels_per_client >= 1,
                "labels_per_client",
                "must be at least 1".into(),
            ),
            PartitionRule::Dirichlet { alpha } => check(
                alpha > 0.0 && alpha.is_finite(),
                "dirichlet_alpha",
                format!("must be positive and finite, got {alpha}"),
            ),
        }
    }

    /// Config text that parses back to `self`. Paths must not contain `#`
    /// or line breaks.
    pub fn to_config_string(&self) -> String {
        let f = &self.federation;
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        put("algorithm", self.algorithm.id().into());
        put("clients", f.num_clients.to_string());
        put("participation", f.participation.to_string());
        put("rounds", f.rounds.to_string());
        put("local_epochs", f.train.epochs.to_string());
        put("lr", f.train.lr.to_string());
        put("batch_size", f.train.batch_size.to_string());
        put("k", f.k.to_string());
        put(
            "mc_samples",
            match f.samples {
                SampleCount::Auto => "auto".into(),
                SampleCount::Fixed(r) => r.to_string(),
            },
        );
        put("alpha_ema", f.alpha_ema.to_string());
        put("exact_threshold", f.exact_threshold.to_string());
        put("force_monte_carlo", f.force_monte_carlo.to_string());
        put(
            "distance",
            match f.distance {
                DistanceMetric::L2 => "l2",
                DistanceMetric::L2Sq => "l2sq",
            }
            .into(),
        );
        put(
            "exploration",
            match f.exploration {
                ExplorationPolicy::UnseenFirst => "unseen_first",
                ExplorationPolicy::RelevanceFirst => "relevance_first",
            }
            .into(),
        );
        put(
            "hidden_dim",
            self.hidden_dim.map_or("none".into(), |h| h.to_string()),
        );
        match &self.dataset {
            DatasetSource::Synth {
                classes,
                dim,
                per_class,
                spread,
            } => {
                put("dataset", "synth".into());
                put("synth.classes", classes.to_string());
                put("synth.dim", dim.to_string());
                put("synth.per_class", per_class.to_string());
                put("synth.spread", spread.to_string());
            }
            DatasetSource::Idx { images, labels } => {
                put("dataset", "idx".into());
                put("idx.images", images.display().to_string());
                put("idx.labels", labels.display().to_string());
            }
        }
        match self.partition {
            PartitionRule::Pathological { labels_per_client } => {
                put("partition", "pathological".into());
                put("labels_per_client", labels_per_client.to_string());
            }
            PartitionRule::Dirichlet { alpha } => {
                put("partition", "dirichlet".into());
                put("dirichlet_alpha", alpha.to_string());
            }
        }
        put("val_frac", f.val_frac.to_string());
        put("test_frac", f.test_frac.to_string());
        put("noise_sigma", f.noise_sigma.to_string());
        put("seed", f.seed.to_string());
        if let Some(output) = &self.output {
            put("output", output.display().to_string());
        }
        put("repeats", self.repeats.to_string());
        put("checkpoint", self.checkpoint.to_string());
        out
    }
}
