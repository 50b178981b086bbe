//! Run configuration documents.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unifl_core::fl::{Method, MethodKind, TrainSettings, Weighting};
use unifl_core::metrics::Averaging;
use unifl_core::model::Hyperparams;
use unifl_core::synthdata::GeneratorConfig;
use unifl_core::Task;

use crate::error::{io, json, Error, Result};

/// Environment variable overriding `output_dir`.
pub const OUT_ENV: &str = "UNIFL_OUT";

/// Model section. `vocab_size` is the BPE target (bytes plus merges); the
/// padding and unknown specials come on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_tokens_per_event: usize,
    pub max_events_per_patient: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub layer_norm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        Self {
            vocab_size: 2048,
            embed_dim: hp.embed_dim,
            hidden_dim: hp.hidden_dim,
            max_tokens_per_event: hp.max_tokens_per_event,
            max_events_per_patient: hp.max_events_per_patient,
            learning_rate: hp.learning_rate,
            batch_size: hp.batch_size,
            layer_norm: hp.layer_norm,
        }
    }
}

impl ModelConfig {
    /// Hyperparameters for a task, given the actual vocabulary length.
    pub fn hyperparams(&self, task: Task, vocab_len: usize) -> Hyperparams {
        Hyperparams {
            vocab_size: vocab_len,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            max_tokens_per_event: self.max_tokens_per_event,
            max_events_per_patient: self.max_events_per_patient,
            task,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            layer_norm: self.layer_norm,
        }
    }
}

/// Training section: everything about a run except method, task and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlSection {
    pub rounds: usize,
    pub local_epochs: usize,
    pub patience: usize,
    pub eval_every: usize,
    pub weighting: Weighting,
    pub mu: f64,
    pub prox_includes_norm: Option<bool>,
    pub literal_shuffle: bool,
    pub averaging: Averaging,
}

impl Default for FlSection {
    fn default() -> Self {
        Self {
            rounds: 30,
            local_epochs: 1,
            patience: 5,
            eval_every: 1,
            weighting: Weighting::Size,
            mu: Method::DEFAULT_MU,
            prox_includes_norm: None,
            literal_shuffle: false,
            averaging: Averaging::Micro,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub fl: FlSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            model: ModelConfig::default(),
            fl: FlSection::default(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads, applies the output-directory override and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io(path))?;
        let mut cfg = Self::from_json(&text).map_err(json(path))?;
        if let Some(dir) = std::env::var_os(OUT_ENV) {
            cfg.output_dir = PathBuf::from(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.model.vocab_size < 256 {
            return Err(Error::Config("model.vocab_size must be at least 256".into()));
        }
        let probe = self.settings(Method::new(MethodKind::FedAvg), Task::Los3, 258, 0);
        probe.validate()?;
        Ok(())
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn method(&self, kind: MethodKind, mu: Option<f64>) -> Method {
        Method::with_mu(kind, mu.unwrap_or(self.fl.mu))
    }

    pub fn settings(&self, method: Method, task: Task, vocab_len: usize, seed: u64) -> TrainSettings {
        TrainSettings {
            method,
            hp: self.model.hyperparams(task, vocab_len),
            rounds: self.fl.rounds,
            local_epochs: self.fl.local_epochs,
            seed,
            patience: self.fl.patience,
            eval_every: self.fl.eval_every,
            weighting: self.fl.weighting,
            prox_includes_norm: self.fl.prox_includes_norm,
            literal_shuffle: self.fl.literal_shuffle,
            averaging: self.fl.averaging,
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.output_dir.join("data")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.output_dir.join("runs")
    }
}
