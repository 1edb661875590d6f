//! JSON configuration files for the pipeline stages. Unspecified fields
//! take the documented defaults; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use tokenbag::dataset::Outcome;
use tokenbag::metrics::EvalOptions;
use tokenbag::nncore::ModelConfig;
use tokenbag::synthgen::GeneratorConfig;
use tokenbag::trainer::{SearchSpace, TrainLoopConfig};
use tokenbag::SourceKind;

pub fn read_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing config {}", path.display()))
}

// ---------------------------------------------------------------------------
// Source selection
// ---------------------------------------------------------------------------

/// `"all"`, `"chart"`, or an explicit list of table names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SourcesSpec {
    Named(String),
    List(Vec<String>),
}

impl Default for SourcesSpec {
    fn default() -> Self {
        SourcesSpec::Named("all".to_string())
    }
}

impl SourcesSpec {
    pub fn resolve(&self) -> Result<Vec<SourceKind>> {
        match self {
            SourcesSpec::Named(name) => match name.as_str() {
                "all" => Ok(SourceKind::ALL.to_vec()),
                "chart" => Ok(vec![SourceKind::ChartEvents]),
                other => bail!("unknown sources spec {other:?} (use \"all\", \"chart\" or a list of table names)"),
            },
            SourcesSpec::List(names) => {
                if names.is_empty() {
                    bail!("sources list must not be empty");
                }
                names
                    .iter()
                    .map(|n| {
                        SourceKind::from_table_name(n)
                            .with_context(|| format!("unknown source table {n:?}"))
                    })
                    .collect()
            }
        }
    }

    pub fn from_sources(sources: &[SourceKind]) -> Self {
        if sources == SourceKind::ALL {
            SourcesSpec::Named("all".to_string())
        } else {
            SourcesSpec::List(sources.iter().map(|s| s.table_name().to_string()).collect())
        }
    }
}

pub fn parse_outcome(name: &str) -> Result<Outcome> {
    Outcome::from_name(name).with_context(|| format!("unknown outcome {name:?} (use \"ihm\" or \"los\")"))
}

// ---------------------------------------------------------------------------
// Model and loop hyperparameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelHyper {
    pub embedding_dim: usize,
    pub embedding_dropout: f64,
    pub n_dense: usize,
    pub neurons_per_layer: usize,
    pub hidden_dropout: f64,
    pub learning_rate: f64,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            embedding_dim: 8,
            embedding_dropout: 0.2,
            n_dense: 2,
            neurons_per_layer: 64,
            hidden_dropout: 0.2,
            learning_rate: 0.003,
        }
    }
}

impl ModelHyper {
    pub fn into_model_config(self, sources: Vec<SourceKind>) -> ModelConfig {
        ModelConfig {
            sources,
            embedding_dim: self.embedding_dim,
            embedding_dropout: self.embedding_dropout,
            n_dense: self.n_dense,
            neurons_per_layer: self.neurons_per_layer,
            hidden_dropout: self.hidden_dropout,
            learning_rate: self.learning_rate,
        }
    }

    pub fn from_model_config(cfg: &ModelConfig) -> Self {
        ModelHyper {
            embedding_dim: cfg.embedding_dim,
            embedding_dropout: cfg.embedding_dropout,
            n_dense: cfg.n_dense,
            neurons_per_layer: cfg.neurons_per_layer,
            hidden_dropout: cfg.hidden_dropout,
            learning_rate: cfg.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LoopDto {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub min_improvement: f64,
}

impl Default for LoopDto {
    fn default() -> Self {
        let d = TrainLoopConfig::default();
        LoopDto {
            max_epochs: d.max_epochs,
            patience: d.patience,
            batch_size: d.batch_size,
            min_improvement: d.min_improvement,
        }
    }
}

impl LoopDto {
    pub fn into_loop_config(self, seed: u64) -> TrainLoopConfig {
        TrainLoopConfig {
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            seed,
            min_improvement: self.min_improvement,
        }
    }
}

// ---------------------------------------------------------------------------
// Stage configs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeConfig {
    pub include_label_text: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub outcome: String,
    pub sources: SourcesSpec,
    pub min_count: u64,
    pub model: ModelHyper,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopDto,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            outcome: "ihm".to_string(),
            sources: SourcesSpec::default(),
            min_count: 2,
            model: ModelHyper::default(),
            loop_cfg: LoopDto::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceDto {
    pub embedding_dim: (usize, usize),
    pub embedding_dropout: (f64, f64),
    pub n_dense: Vec<usize>,
    pub neurons_per_layer: Vec<usize>,
    pub hidden_dropout: (f64, f64),
    pub learning_rate: (f64, f64),
}

impl Default for SpaceDto {
    fn default() -> Self {
        let d = SearchSpace::default();
        SpaceDto {
            embedding_dim: d.embedding_dim,
            embedding_dropout: d.embedding_dropout,
            n_dense: d.n_dense_choices,
            neurons_per_layer: d.neuron_choices,
            hidden_dropout: d.hidden_dropout,
            learning_rate: d.learning_rate,
        }
    }
}

impl SpaceDto {
    pub fn into_space(self) -> SearchSpace {
        SearchSpace {
            embedding_dim: self.embedding_dim,
            embedding_dropout: self.embedding_dropout,
            n_dense_choices: self.n_dense,
            neuron_choices: self.neurons_per_layer,
            hidden_dropout: self.hidden_dropout,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub outcome: String,
    pub sources: SourcesSpec,
    pub min_count: u64,
    pub trials: usize,
    pub space: SpaceDto,
    #[serde(rename = "loop")]
    pub loop_cfg: LoopDto,
    pub seed: u64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            outcome: "ihm".to_string(),
            sources: SourcesSpec::default(),
            min_count: 2,
            trials: 10,
            space: SpaceDto::default(),
            loop_cfg: LoopDto::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub threshold: f64,
    pub n_bins: usize,
    pub n_resamples: usize,
    pub n_permutations: usize,
    pub level: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let d = EvalOptions::default();
        EvalConfig {
            threshold: d.threshold,
            n_bins: d.n_bins,
            n_resamples: d.n_resamples,
            n_permutations: d.n_permutations,
            level: d.level,
            batch_size: d.batch_size,
            seed: d.seed,
        }
    }
}

impl EvalConfig {
    pub fn into_options(self, seed_override: Option<u64>) -> EvalOptions {
        EvalOptions {
            threshold: self.threshold,
            n_bins: self.n_bins,
            n_resamples: self.n_resamples,
            n_permutations: self.n_permutations,
            level: self.level,
            seed: seed_override.unwrap_or(self.seed),
            batch_size: self.batch_size,
        }
    }
}

// ---------------------------------------------------------------------------
// Generator config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub extra_admission_prob: f64,
    pub events_per_source: BTreeMap<String, f64>,
    pub vocab_size_per_source: BTreeMap<String, usize>,
    pub signal_strength: BTreeMap<String, f64>,
    pub base_rate_ihm: f64,
    pub base_rate_los: f64,
    pub beta_ihm: f64,
    pub beta_los: f64,
    pub multi_stay_prob: f64,
    pub short_stay_prob: f64,
    pub note_words_per_event: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = GeneratorConfig::default();
        let name_map = |m: &BTreeMap<SourceKind, f64>| {
            m.iter()
                .map(|(s, &v)| (s.table_name().to_string(), v))
                .collect()
        };
        SynthConfig {
            n_patients: d.n_patients,
            extra_admission_prob: d.extra_admission_prob,
            events_per_source: name_map(&d.events_per_source),
            vocab_size_per_source: d
                .vocab_size_per_source
                .iter()
                .map(|(s, &v)| (s.table_name().to_string(), v))
                .collect(),
            signal_strength: name_map(&d.signal_strength),
            base_rate_ihm: d.base_rate_ihm,
            base_rate_los: d.base_rate_los,
            beta_ihm: d.beta_ihm,
            beta_los: d.beta_los,
            multi_stay_prob: d.multi_stay_prob,
            short_stay_prob: d.short_stay_prob,
            note_words_per_event: d.note_words_per_event,
            seed: d.seed,
        }
    }
}

impl SynthConfig {
    pub fn into_generator_config(self, seed_override: Option<u64>) -> Result<GeneratorConfig> {
        let keyed = |m: BTreeMap<String, f64>| -> Result<BTreeMap<SourceKind, f64>> {
            m.into_iter()
                .map(|(name, v)| {
                    SourceKind::from_table_name(&name)
                        .map(|s| (s, v))
                        .with_context(|| format!("unknown source table {name:?}"))
                })
                .collect()
        };
        Ok(GeneratorConfig {
            n_patients: self.n_patients,
            extra_admission_prob: self.extra_admission_prob,
            events_per_source: keyed(self.events_per_source)?,
            vocab_size_per_source: self
                .vocab_size_per_source
                .into_iter()
                .map(|(name, v)| {
                    SourceKind::from_table_name(&name)
                        .map(|s| (s, v))
                        .with_context(|| format!("unknown source table {name:?}"))
                })
                .collect::<Result<_>>()?,
            signal_strength: keyed(self.signal_strength)?,
            base_rate_ihm: self.base_rate_ihm,
            base_rate_los: self.base_rate_los,
            beta_ihm: self.beta_ihm,
            beta_los: self.beta_los,
            multi_stay_prob: self.multi_stay_prob,
            short_stay_prob: self.short_stay_prob,
            note_words_per_event: self.note_words_per_event,
            seed: seed_override.unwrap_or(self.seed),
        })
    }
}
