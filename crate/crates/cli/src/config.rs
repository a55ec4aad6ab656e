//! Experiment configuration: a flat `key = value` file, an optional
//! environment override for the scorer endpoint, and command-line
//! overrides, applied in that order on top of built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use mtrl_core::corpus::FileFormat;
use mtrl_core::grpo::{TokenAgg, TrainConfig};
use mtrl_core::protocol::ThinkMode;
use mtrl_core::reward::MetricKind;
use mtrl_core::{LanguageSpec, ReorderRule};
use serde::Serialize;

/// Environment variable consulted for the remote scorer endpoint.
/// Precedence: `--set scorer_endpoint=...` > this variable > the
/// config file > none.
pub const SCORER_ENDPOINT_ENV: &str = "MTRL_SCORER_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {source}")]
    InFile {
        path: String,
        line: usize,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("expected `key = value`, got {0:?}")]
    BadLine(String),
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("{key}: cannot parse {value:?} as {expected}")]
    BadValue {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    /// Synonym-lexicon scorer; needs a generated language pair.
    Mock,
    /// HTTP scorer at `scorer_endpoint`.
    Remote,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Optimization settings, exposed as flat keys (`lr`,
    /// `group_size`, ...).
    pub train: TrainConfig,
    pub hidden_dim: usize,
    pub format_prior: f64,
    /// Synthetic language pair, exposed as flat keys (`n_concepts`,
    /// `reorder`, ...). Ignored when `train_file` is set.
    pub language: LanguageSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub corpus_seed: u64,
    pub train_file: Option<PathBuf>,
    pub test_file: Option<PathBuf>,
    pub file_format: FileFormat,
    pub min_chars: usize,
    pub steps: u64,
    pub checkpoint_interval: u64,
    pub eval_interval: u64,
    pub eval_temperature: f64,
    pub eval_greedy: bool,
    pub scorer: ScorerKind,
    pub scorer_endpoint: Option<String>,
    pub scorer_timeout_ms: u64,
    pub scorer_max_in_flight: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            hidden_dim: 24,
            format_prior: 5.0,
            language: LanguageSpec::default(),
            n_train: 512,
            n_test: 128,
            corpus_seed: 0,
            train_file: None,
            test_file: None,
            file_format: FileFormat::Jsonl,
            min_chars: 30,
            steps: 500,
            checkpoint_interval: 100,
            eval_interval: 0,
            eval_temperature: 0.2,
            eval_greedy: false,
            scorer: ScorerKind::Mock,
            scorer_endpoint: None,
            scorer_timeout_ms: 5000,
            scorer_max_in_flight: 4,
        }
    }
}

fn parse<T: std::str::FromStr>(
    key: &'static str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key,
        value: value.to_string(),
        expected,
    })
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ConfigError::BadValue {
            key,
            value: other.to_string(),
            expected: "true|false",
        }),
    }
}

impl ExperimentConfig {
    /// Defaults, then the file (if any), then the environment, then
    /// explicit overrides; validated at the end.
    pub fn load(
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        if let Ok(endpoint) = std::env::var(SCORER_ENDPOINT_ENV) {
            if !endpoint.is_empty() {
                cfg.scorer_endpoint = Some(endpoint);
            }
        }
        for (key, value) in overrides {
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let in_file = |source: ConfigError| ConfigError::InFile {
                path: path.display().to_string(),
                line: idx + 1,
                source: Box::new(source),
            };
            let Some((key, value)) = line.split_once('=') else {
                return Err(in_file(ConfigError::BadLine(line.to_string())));
            };
            self.apply(key.trim(), value.trim()).map_err(in_file)?;
        }
        Ok(())
    }

    /// Sets one key. Keys mirror the struct fields; enums take their
    /// lowercase names.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "group_size" => self.train.group_size = parse("group_size", value, "integer")?,
            "batch_prompts" => self.train.batch_prompts = parse("batch_prompts", value, "integer")?,
            "lr" => self.train.lr = parse("lr", value, "number")?,
            "clip_eps" => self.train.clip_eps = parse("clip_eps", value, "number")?,
            "kl_beta" => self.train.kl_beta = parse("kl_beta", value, "number")?,
            "temperature" => self.train.temperature = parse("temperature", value, "number")?,
            "max_gen_len" => self.train.max_gen_len = parse("max_gen_len", value, "integer")?,
            "ppo_epochs" => self.train.ppo_epochs = parse("ppo_epochs", value, "integer")?,
            "seed" => self.train.seed = parse("seed", value, "integer")?,
            "token_agg" => {
                self.train.token_agg = match value {
                    "sequence" => TokenAgg::Sequence,
                    "token" => TokenAgg::Token,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "token_agg",
                            value: value.into(),
                            expected: "sequence|token",
                        })
                    }
                }
            }
            "metric" => {
                self.train.metric = match value {
                    "lex" => MetricKind::Lex,
                    "sem" => MetricKind::Sem,
                    "mix" => MetricKind::Mix,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "metric",
                            value: value.into(),
                            expected: "lex|sem|mix",
                        })
                    }
                }
            }
            "think_mode" => {
                self.train.think_mode = match value {
                    "required" => ThinkMode::Required,
                    "optional" => ThinkMode::Optional,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "think_mode",
                            value: value.into(),
                            expected: "required|optional",
                        })
                    }
                }
            }
            "format_penalty" => self.train.format_penalty = parse("format_penalty", value, "number")?,
            "hidden_dim" => self.hidden_dim = parse("hidden_dim", value, "integer")?,
            "format_prior" => self.format_prior = parse("format_prior", value, "number")?,
            "src_lang" => self.language.src_lang = value.to_string(),
            "tgt_lang" => self.language.tgt_lang = value.to_string(),
            "n_concepts" => self.language.n_concepts = parse("n_concepts", value, "integer")?,
            "n_synonyms" => self.language.n_synonyms = parse("n_synonyms", value, "integer")?,
            "reorder" => {
                self.language.reorder = match value {
                    "identity" => ReorderRule::Identity,
                    "swap_adjacent" => ReorderRule::SwapAdjacent,
                    "reverse" => ReorderRule::Reverse,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "reorder",
                            value: value.into(),
                            expected: "identity|swap_adjacent|reverse",
                        })
                    }
                }
            }
            "min_len" => self.language.min_len = parse("min_len", value, "integer")?,
            "max_len" => self.language.max_len = parse("max_len", value, "integer")?,
            "n_train" => self.n_train = parse("n_train", value, "integer")?,
            "n_test" => self.n_test = parse("n_test", value, "integer")?,
            "corpus_seed" => self.corpus_seed = parse("corpus_seed", value, "integer")?,
            "train_file" => self.train_file = Some(PathBuf::from(value)),
            "test_file" => self.test_file = Some(PathBuf::from(value)),
            "file_format" => {
                self.file_format = match value {
                    "tsv" => FileFormat::Tsv,
                    "jsonl" => FileFormat::Jsonl,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "file_format",
                            value: value.into(),
                            expected: "tsv|jsonl",
                        })
                    }
                }
            }
            "min_chars" => self.min_chars = parse("min_chars", value, "integer")?,
            "steps" => self.steps = parse("steps", value, "integer")?,
            "checkpoint_interval" => {
                self.checkpoint_interval = parse("checkpoint_interval", value, "integer")?
            }
            "eval_interval" => self.eval_interval = parse("eval_interval", value, "integer")?,
            "eval_temperature" => self.eval_temperature = parse("eval_temperature", value, "number")?,
            "eval_greedy" => self.eval_greedy = parse_bool("eval_greedy", value)?,
            "scorer" => {
                self.scorer = match value {
                    "mock" => ScorerKind::Mock,
                    "remote" => ScorerKind::Remote,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "scorer",
                            value: value.into(),
                            expected: "mock|remote",
                        })
                    }
                }
            }
            "scorer_endpoint" => self.scorer_endpoint = Some(value.to_string()),
            "scorer_timeout_ms" => self.scorer_timeout_ms = parse("scorer_timeout_ms", value, "integer")?,
            "scorer_max_in_flight" => {
                self.scorer_max_in_flight = parse("scorer_max_in_flight", value, "integer")?
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.hidden_dim == 0 {
            return Err(ConfigError::Invalid("hidden_dim must be at least 1".into()));
        }
        if !self.format_prior.is_finite() || self.format_prior < 0.0 {
            return Err(ConfigError::Invalid(
                "format_prior must be finite and non-negative".into(),
            ));
        }
        if self.steps == 0 {
            return Err(ConfigError::Invalid("steps must be at least 1".into()));
        }
        if !(self.eval_temperature.is_finite() && self.eval_temperature > 0.0) {
            return Err(ConfigError::Invalid(
                "eval_temperature must be positive and finite".into(),
            ));
        }
        if self.train_file.is_some() != self.test_file.is_some() {
            return Err(ConfigError::Invalid(
                "train_file and test_file must be set together".into(),
            ));
        }
        if self.train_file.is_none() {
            self.language
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if self.n_train == 0 || self.n_test == 0 {
                return Err(ConfigError::Invalid(
                    "n_train and n_test must be at least 1".into(),
                ));
            }
        }
        if self.scorer_max_in_flight == 0 {
            return Err(ConfigError::Invalid(
                "scorer_max_in_flight must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn scorer_timeout(&self) -> Duration {
        Duration::from_millis(self.scorer_timeout_ms)
    }
}

/// Splits a `key=value` override argument.
pub fn parse_override(arg: &str) -> Result<(String, String), ConfigError> {
    let Some((k, v)) = arg.split_once('=') else {
        return Err(ConfigError::BadLine(arg.to_string()));
    };
    Ok((k.trim().to_string(), v.trim().to_string()))
}
