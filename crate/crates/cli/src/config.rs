//! Run configuration: defaults, then a TOML file, then `CELETRIP_<KEY>`
//! environment variables, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use celetrip::features::{CbowConfig, DEFAULT_MAX_FEATURES};
use celetrip::geo::ContainmentScope;
use celetrip::graphs::DEFAULT_WINDOW;
use celetrip::model::ModelConfig;
use celetrip::train_eval::{default_split_date, TrainConfig};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const ENV_PREFIX: &str = "CELETRIP_";

/// Keys holding file paths. They have no default and so never appear in a
/// serialized default config.
const PATH_KEYS: &[&str] = &[
    "corpus",
    "gazetteer",
    "ground_truth",
    "instances",
    "word_vectors",
    "kb_triples",
    "kb_entity_vectors",
    "kb_relation_vectors",
    "kb_labels",
    "model_dir",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    pub kb_triples: Option<PathBuf>,
    pub kb_entity_vectors: Option<PathBuf>,
    pub kb_relation_vectors: Option<PathBuf>,
    pub kb_labels: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,

    pub seed: u64,
    pub containment: ContainmentScope,

    pub embedding_dim: usize,
    pub cbow_window: usize,
    pub cbow_negatives: usize,
    pub cbow_epochs: usize,
    pub cbow_lr: f64,
    pub min_count: usize,

    pub window: usize,
    pub max_features: usize,
    pub hidden_dim: usize,
    pub f_dim: usize,
    pub blocks: usize,
    pub epsilon: f64,
    pub q: usize,
    pub trip_layers: usize,
    pub use_oriented_pooling: bool,
    pub use_entity_event: bool,

    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub pos_weight: f64,
    pub threshold: f64,
    pub split_date: NaiveDate,
    pub val_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let cbow = CbowConfig::default();
        Self {
            corpus: None,
            gazetteer: None,
            ground_truth: None,
            instances: None,
            word_vectors: None,
            kb_triples: None,
            kb_entity_vectors: None,
            kb_relation_vectors: None,
            kb_labels: None,
            model_dir: None,
            seed: 0,
            containment: ContainmentScope::default(),
            embedding_dim: cbow.dim,
            cbow_window: cbow.window,
            cbow_negatives: cbow.negatives,
            cbow_epochs: cbow.epochs,
            cbow_lr: cbow.lr,
            min_count: cbow.min_count,
            window: DEFAULT_WINDOW,
            max_features: DEFAULT_MAX_FEATURES,
            hidden_dim: model.hidden_dim,
            f_dim: model.f_dim,
            blocks: model.blocks,
            epsilon: model.epsilon,
            q: model.q,
            trip_layers: model.trip_layers,
            use_oriented_pooling: model.use_oriented_pooling,
            use_entity_event: model.use_entity_event,
            lr: train.lr,
            max_epochs: train.max_epochs,
            patience: train.patience,
            pos_weight: train.pos_weight,
            threshold: train.threshold,
            split_date: default_split_date(),
            val_frac: 0.1,
        }
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("invalid config field {field}: {msg}")
}

/// Parses a raw override into the TOML type of the key's default value.
fn coerce(key: &str, raw: &str, default: Option<&Value>) -> Result<Value> {
    let parsed = || raw.parse::<Value>().ok();
    let value = match default {
        None | Some(Value::String(_)) => Value::String(raw.to_string()),
        Some(Value::Integer(_)) => Value::Integer(
            raw.parse()
                .map_err(|_| field_error(key, format!("expected an integer, got {raw:?}")))?,
        ),
        Some(Value::Float(_)) => Value::Float(
            raw.parse()
                .map_err(|_| field_error(key, format!("expected a number, got {raw:?}")))?,
        ),
        Some(Value::Boolean(_)) => Value::Boolean(
            raw.parse()
                .map_err(|_| field_error(key, format!("expected true or false, got {raw:?}")))?,
        ),
        Some(_) => parsed().ok_or_else(|| field_error(key, format!("cannot parse {raw:?}")))?,
    };
    Ok(value)
}

/// TOML dates and integer-valued floats are normalized so they deserialize
/// into the config's field types.
fn normalize(table: &mut Table, defaults: &Table) {
    for (key, value) in table.iter_mut() {
        match (&*value, defaults.get(key)) {
            (Value::Datetime(d), _) => *value = Value::String(d.to_string()),
            (Value::Integer(i), Some(Value::Float(_))) => *value = Value::Float(*i as f64),
            _ => {}
        }
    }
}

/// Finds the key whose value alone fails to deserialize.
fn locate_type_error(table: &Table, defaults: &Table, err: toml::de::Error) -> anyhow::Error {
    for (key, value) in table {
        let mut probe = defaults.clone();
        probe.insert(key.clone(), value.clone());
        if let Err(e) = probe.try_into::<RunConfig>() {
            return field_error(key, e.message());
        }
    }
    anyhow!("invalid config: {}", err.message())
}

impl RunConfig {
    /// Layers a config file, environment variables and explicit overrides
    /// (`key`, raw value) over `base`.
    pub fn resolve(
        base: RunConfig,
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<RunConfig> {
        let defaults = Table::try_from(RunConfig::default()).expect("default config serializes");
        let known = |k: &str| defaults.contains_key(k) || PATH_KEYS.contains(&k);
        let mut table = Table::try_from(base).expect("config serializes");

        if let Some(path) = file {
            let raw = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let mut from_file: Table =
                toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
            normalize(&mut from_file, &defaults);
            for (k, v) in from_file {
                if !known(&k) {
                    bail!("invalid config field {k}: unknown key in {}", path.display());
                }
                table.insert(k, v);
            }
        }
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_lowercase(), v)))
            .filter(|(k, _)| known(k))
            .collect();
        env.sort();
        for (k, raw) in env.iter().chain(overrides) {
            if !known(k) {
                bail!("invalid config field {k}: unknown key");
            }
            table.insert(k.clone(), coerce(k, raw, defaults.get(k))?);
        }
        let config: RunConfig = match table.clone().try_into() {
            Ok(c) => c,
            Err(e) => return Err(locate_type_error(&table, &defaults, e)),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(field_error(
                "epsilon",
                format!("must lie in (0, 1), got {}", self.epsilon),
            ));
        }
        if !(0.0..1.0).contains(&self.val_frac) {
            return Err(field_error(
                "val_frac",
                format!("must lie in [0, 1), got {}", self.val_frac),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(field_error(
                "threshold",
                format!("must lie in (0, 1), got {}", self.threshold),
            ));
        }
        for (field, v) in [
            ("lr", self.lr),
            ("cbow_lr", self.cbow_lr),
            ("pos_weight", self.pos_weight),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_error(field, format!("must be positive, got {v}")));
            }
        }
        if self.window < 2 {
            return Err(field_error(
                "window",
                format!("must be at least 2, got {}", self.window),
            ));
        }
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("cbow_window", self.cbow_window),
            ("cbow_epochs", self.cbow_epochs),
            ("max_features", self.max_features),
            ("hidden_dim", self.hidden_dim),
            ("f_dim", self.f_dim),
            ("blocks", self.blocks),
            ("trip_layers", self.trip_layers),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(field_error(field, "must be positive"));
            }
        }
        Ok(())
    }

    /// A required path, which must exist.
    pub fn path(&self, key: &'static str) -> Result<&Path> {
        let p = self.optional_path(key)?.ok_or_else(|| {
            anyhow!(
                "missing input {key}: pass --{} or set it in the config",
                key.replace('_', "-")
            )
        })?;
        Ok(p)
    }

    /// An optional path, which must exist when given.
    pub fn optional_path(&self, key: &'static str) -> Result<Option<&Path>> {
        let p = match key {
            "corpus" => &self.corpus,
            "gazetteer" => &self.gazetteer,
            "ground_truth" => &self.ground_truth,
            "instances" => &self.instances,
            "word_vectors" => &self.word_vectors,
            "kb_triples" => &self.kb_triples,
            "kb_entity_vectors" => &self.kb_entity_vectors,
            "kb_relation_vectors" => &self.kb_relation_vectors,
            "kb_labels" => &self.kb_labels,
            "model_dir" => &self.model_dir,
            _ => unreachable!("not a path key: {key}"),
        };
        match p.as_deref() {
            Some(p) if !p.exists() => bail!("{key}: {} does not exist", p.display()),
            other => Ok(other),
        }
    }

    pub fn cbow(&self) -> CbowConfig {
        CbowConfig {
            dim: self.embedding_dim,
            window: self.cbow_window,
            negatives: self.cbow_negatives,
            epochs: self.cbow_epochs,
            lr: self.cbow_lr,
            min_count: self.min_count,
            seed: self.seed,
        }
    }

    /// Model configuration; input widths come from the loaded features.
    pub fn model(&self, word_dim: usize, article_dim: usize, kb_dim: usize) -> ModelConfig {
        ModelConfig {
            word_dim,
            article_dim,
            kb_dim,
            hidden_dim: self.hidden_dim,
            f_dim: self.f_dim,
            blocks: self.blocks,
            epsilon: self.epsilon,
            q: self.q,
            trip_layers: self.trip_layers,
            use_oriented_pooling: self.use_oriented_pooling,
            use_entity_event: self.use_entity_event,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            pos_weight: self.pos_weight,
            threshold: self.threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn kv(k: &str, v: &str) -> (String, String) {
        (k.to_string(), v.to_string())
    }

    #[test]
    fn flags_beat_env_beat_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "epsilon = 0.3\nq = 3\nlr = 1\nsplit_date = 2018-01-01").unwrap();
        let env = vec![kv("CELETRIP_Q", "4"), kv("CELETRIP_PATIENCE", "3"), kv("OTHER_Q", "9")];
        let cfg = RunConfig::resolve(RunConfig::default(), Some(file.path()), env, &[kv("patience", "5")]).unwrap();
        assert_eq!(cfg.epsilon, 0.3);
        assert_eq!(cfg.q, 4);
        assert_eq!(cfg.patience, 5);
        assert_eq!(cfg.lr, 1.0);
        assert_eq!(cfg.split_date, NaiveDate::from_ymd_opt(2018, 1, 1).unwrap());
    }

    #[test]
    fn violations_name_the_field() {
        let err = RunConfig::resolve(RunConfig::default(), None, vec![], &[kv("epsilon", "1.5")]).unwrap_err();
        assert!(err.to_string().starts_with("invalid config field epsilon"), "{err}");
        let err = RunConfig::resolve(RunConfig::default(), None, vec![], &[kv("q", "-1")]).unwrap_err();
        assert!(err.to_string().contains("field q"), "{err}");
        let err = RunConfig::resolve(RunConfig::default(), None, vec![], &[kv("hiddn_dim", "3")]).unwrap_err();
        assert!(err.to_string().contains("hiddn_dim"), "{err}");
    }

    #[test]
    fn unrelated_env_vars_are_ignored() {
        let env = vec![kv("CELETRIP_TRIP_INSTANCES", "x"), kv("CELETRIP_LOG", "debug")];
        assert_eq!(
            RunConfig::resolve(RunConfig::default(), None, env, &[]).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn missing_paths_are_reported() {
        let cfg = RunConfig {
            corpus: Some("/no/such/file".into()),
            ..RunConfig::default()
        };
        assert!(cfg.path("corpus").unwrap_err().to_string().contains("does not exist"));
        assert!(cfg.path("gazetteer").unwrap_err().to_string().contains("--gazetteer"));
    }
}
