//! JSON run configurations.
//!
//! Hyperparameter keys use the snake_case names of the hyperparameter table
//! (`batch_size`, `vocabulary_size`, `freeze`, `model`, `max_length`,
//! `epochs`, `alpha`, `tolerance`, `smoothing_factor`, `trees_per_batch`,
//! `max_depth`, `max_features_fraction`, `split_criterion`, `hidden_size`,
//! `num_layers`, `num_epochs`, `learning_rate`, `epsilon`, `activation`,
//! `pooling_function`, `optimizer`, `bidirectional`). Unknown keys are
//! rejected. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use emobench::corpus::{Fractions, StableOrder};
use emobench::learners::{ForestConfig, LogisticConfig};
use emobench::neural::{Activation, Pooling, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{require_file, CliError, CliResult};

pub const DEFAULT_BATCH_SIZE: usize = 100_000;

/// Reads and validates a config, naming the offending key on failure.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Core(emobench::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))?;
    parse_config(&text).map_err(|message| CliError::Config {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at `{path}`: {}", e.inner())
        }
    })
}

/// Maps `{"<tag>": "variant", ...fields}` onto an externally tagged enum,
/// keeping the field path in deserialization errors.
macro_rules! tag_field_module {
    ($name:ident, $tag:literal) => {
        pub(crate) mod $name {
            use serde::de::{DeserializeOwned, Error as _};
            use serde::ser::Error as _;
            use serde::{Deserialize, Deserializer, Serialize, Serializer};
            use serde_json::{Map, Value};

            pub fn to_value<T: Serialize>(v: &T) -> serde_json::Result<Value> {
                match serde_json::to_value(v)? {
                    Value::Object(outer) if outer.len() == 1 => {
                        let (variant, fields) = outer.into_iter().next().expect("one entry");
                        let mut map = Map::new();
                        map.insert($tag.to_string(), Value::String(variant));
                        if let Value::Object(f) = fields {
                            map.extend(f);
                        }
                        Ok(Value::Object(map))
                    }
                    Value::String(variant) => Ok(serde_json::json!({ $tag: variant })),
                    other => Ok(other),
                }
            }

            pub fn serialize<T: Serialize, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
                to_value(v).map_err(S::Error::custom)?.serialize(s)
            }

            pub fn deserialize<'de, T: DeserializeOwned, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
                let Value::Object(mut map) = Value::deserialize(d)? else {
                    return Err(D::Error::custom(concat!("expected an object with a `", $tag, "` field")));
                };
                let variant = match map.remove($tag) {
                    Some(Value::String(v)) => v,
                    Some(_) => return Err(D::Error::custom(concat!("`", $tag, "` must be a string"))),
                    None => return Err(D::Error::custom(concat!("missing field `", $tag, "`"))),
                };
                let external = Value::Object(Map::from_iter([(variant, Value::Object(map))]));
                serde_path_to_error::deserialize(external).map_err(|e| {
                    let path = e.path().to_string();
                    match path.split_once('.') {
                        Some((_, field)) => D::Error::custom(format!("field `{field}`: {}", e.inner())),
                        None => D::Error::custom(e.inner()),
                    }
                })
            }
        }
    };
}

tag_field_module!(kind_tagged, "kind");
tag_field_module!(format_tagged, "format");

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn default_true() -> bool {
    true
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_weight_decay() -> f64 {
    0.01
}

fn default_patience() -> usize {
    5
}

fn default_min_tokens() -> usize {
    3
}

fn default_max_tokens() -> usize {
    32
}

/// Prepared corpora produced by `prepare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub taxonomy: PathBuf,
    pub train: PathBuf,
    pub validation: PathBuf,
}

/// Written as `{"kind": "...", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RepresentationConfig {
    Bow {
        vocabulary_size: usize,
    },
    Tfidf {
        vocabulary_size: usize,
    },
    /// Fixed-length sequences of vectors from a word-vector table.
    Embedding {
        /// Word-vector table file.
        model: PathBuf,
        max_length: usize,
        /// Embeddings are never fine-tuned; only `true` is accepted.
        #[serde(default = "default_true")]
        freeze: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    #[default]
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    AdamW,
}

/// Written as `{"kind": "...", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerConfig {
    NaiveBayes {
        smoothing_factor: f64,
    },
    LogisticRegression {
        epochs: usize,
        alpha: f64,
        tolerance: f64,
        #[serde(default = "default_patience")]
        patience: usize,
    },
    RandomForest {
        trees_per_batch: usize,
        max_trees: usize,
        max_depth: usize,
        max_features_fraction: f64,
        #[serde(default)]
        split_criterion: SplitCriterion,
    },
    DnnPool {
        hidden_size: usize,
        num_layers: usize,
        num_epochs: usize,
        learning_rate: f64,
        epsilon: f64,
        activation: Activation,
        pooling_function: Pooling,
        #[serde(default)]
        optimizer: Optimizer,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
    BiLstm {
        hidden_size: usize,
        num_layers: usize,
        num_epochs: usize,
        learning_rate: f64,
        epsilon: f64,
        #[serde(default = "default_true")]
        bidirectional: bool,
        pooling_function: Pooling,
        #[serde(default)]
        optimizer: Optimizer,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
}

impl LearnerConfig {
    pub fn is_neural(&self) -> bool {
        matches!(self, LearnerConfig::DnnPool { .. } | LearnerConfig::BiLstm { .. })
    }

    pub fn logistic(&self) -> Option<LogisticConfig> {
        match *self {
            LearnerConfig::LogisticRegression {
                epochs,
                alpha,
                tolerance,
                patience,
            } => Some(LogisticConfig {
                alpha,
                epochs,
                tolerance,
                patience,
            }),
            _ => None,
        }
    }

    pub fn forest(&self) -> Option<ForestConfig> {
        match *self {
            LearnerConfig::RandomForest {
                trees_per_batch,
                max_trees,
                max_depth,
                max_features_fraction,
                ..
            } => Some(ForestConfig {
                trees_per_batch,
                max_trees,
                max_depth,
                max_features_fraction,
            }),
            _ => None,
        }
    }

    pub fn neural_training(&self, batch_size: usize) -> Option<TrainConfig> {
        match *self {
            LearnerConfig::DnnPool {
                num_epochs,
                learning_rate,
                epsilon,
                weight_decay,
                ..
            }
            | LearnerConfig::BiLstm {
                num_epochs,
                learning_rate,
                epsilon,
                weight_decay,
                ..
            } => Some(TrainConfig {
                num_epochs,
                batch_size,
                learning_rate,
                epsilon,
                weight_decay,
            }),
            _ => None,
        }
    }
}

/// Configuration for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(with = "kind_tagged")]
    pub representation: RepresentationConfig,
    #[serde(with = "kind_tagged")]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub seed: u64,
    /// Tune per-label thresholds on validation; otherwise 0.5 everywhere.
    #[serde(default = "default_true")]
    pub tune_thresholds: bool,
}

impl RunConfig {
    /// Checks cross-field constraints and makes paths absolute.
    pub fn finalize(mut self, config_dir: &Path) -> CliResult<Self> {
        let invalid = |m: &str| Err(CliError::Invalid(m.to_string()));
        if self.batch_size == 0 {
            return invalid("batch_size must be at least 1");
        }
        let embedding = matches!(self.representation, RepresentationConfig::Embedding { .. });
        if embedding != self.learner.is_neural() {
            return invalid("neural learners need the embedding representation and statistical learners a sparse one");
        }
        match &mut self.representation {
            RepresentationConfig::Bow { vocabulary_size } | RepresentationConfig::Tfidf { vocabulary_size } => {
                if *vocabulary_size == 0 {
                    return invalid("vocabulary_size must be at least 1");
                }
            }
            RepresentationConfig::Embedding { model, max_length, freeze } => {
                if !*freeze {
                    return invalid("freeze = false is not supported: embedding tables are not fine-tuned");
                }
                if *max_length == 0 {
                    return invalid("max_length must be at least 1");
                }
                *model = resolve(config_dir, model);
            }
        }
        self.data.taxonomy = resolve(config_dir, &self.data.taxonomy);
        self.data.train = resolve(config_dir, &self.data.train);
        self.data.validation = resolve(config_dir, &self.data.validation);
        Ok(self)
    }

    /// The run's hyperparameters as a flat key/value map.
    pub fn hyperparameters(&self) -> std::collections::BTreeMap<String, serde_json::Value> {
        let mut out = std::collections::BTreeMap::new();
        out.insert("batch_size".to_string(), self.batch_size.into());
        out.insert("tune_thresholds".to_string(), self.tune_thresholds.into());
        for (prefix, value) in [
            ("representation", kind_tagged::to_value(&self.representation)),
            ("learner", kind_tagged::to_value(&self.learner)),
        ] {
            if let Ok(serde_json::Value::Object(map)) = value {
                for (k, v) in map {
                    let key = if k == "kind" { prefix.to_string() } else { k };
                    out.insert(key, v);
                }
            }
        }
        out
    }
}

/// Written as `{"format": "...", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Directory holding the `train.tsv`, `dev.tsv` and `test.tsv` release files.
    GoemotionsTsv { dir: PathBuf },
    VentJsonl {
        path: PathBuf,
        taxonomy: PathBuf,
        #[serde(default)]
        skip_unknown: bool,
    },
    /// Already in the prepared format.
    Jsonl { path: PathBuf, taxonomy: PathBuf },
    /// Generated Vent-like corpus.
    SyntheticVent {
        examples: usize,
        #[serde(default = "default_emotions")]
        emotions: usize,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_min_tokens")]
    pub min_tokens: usize,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    /// `YYYY-MM`; enables the stable-emotion filter.
    #[serde(default)]
    pub stable_cutoff: Option<String>,
    #[serde(default = "default_stable_order")]
    pub stable_order: StableOrder,
}

fn default_emotions() -> usize {
    88
}

fn default_stable_order() -> StableOrder {
    StableOrder::CutoffFirst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    Random,
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub method: SplitMethod,
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SplitConfig {
    pub fn fractions(&self) -> Fractions {
        Fractions {
            train: self.train,
            val: self.validation,
            test: self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationSampleConfig {
    pub per_emotion: usize,
    /// Word list of terms that exclude a snippet.
    #[serde(default)]
    pub excluded_terms: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Configuration for `prepare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareConfig {
    #[serde(with = "format_tagged")]
    pub source: SourceConfig,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    /// Required unless the source ships its own split.
    #[serde(default)]
    pub split: Option<SplitConfig>,
    /// Draws the reader-annotation sample from the test split.
    #[serde(default)]
    pub annotation_sample: Option<AnnotationSampleConfig>,
}

impl PrepareConfig {
    pub fn finalize(mut self, config_dir: &Path) -> CliResult<Self> {
        match &mut self.source {
            SourceConfig::GoemotionsTsv { dir } => *dir = resolve(config_dir, dir),
            SourceConfig::VentJsonl { path, taxonomy, .. } | SourceConfig::Jsonl { path, taxonomy } => {
                *path = resolve(config_dir, path);
                *taxonomy = resolve(config_dir, taxonomy);
            }
            SourceConfig::SyntheticVent { examples, emotions, .. } => {
                if *examples == 0 || *emotions == 0 {
                    return Err(CliError::Invalid("examples and emotions must be at least 1".into()));
                }
            }
        }
        let presplit = matches!(self.source, SourceConfig::GoemotionsTsv { .. });
        if !presplit && self.split.is_none() {
            return Err(CliError::Invalid("`split` is required for this source".into()));
        }
        if let Some(f) = &self.filter {
            if f.min_tokens > f.max_tokens {
                return Err(CliError::Invalid("min_tokens exceeds max_tokens".into()));
            }
        }
        if let Some(s) = &mut self.annotation_sample {
            if let Some(p) = &mut s.excluded_terms {
                *p = resolve(config_dir, p);
            }
        }
        Ok(self)
    }
}
