//! Run configuration, read from TOML.
//!
//! Every key is optional and falls back to the model defaults. Unknown keys
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use plstm::corpus::DEFAULT_SEQ_LEN;
use plstm::model::{Aggregation, GateMode, ModelConfig, BRANCH_ORDER};
use plstm::train::{AdamConfig, TrainConfig};
use plstm::LossKind;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub seq_len: usize,
    pub dropout_embed: f64,
    pub dropout_recurrent: f64,
    pub gate_mode: GateMode,
    pub aggregation: Aggregation,

    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip per branch and batch; 0 disables it.
    pub clip_norm: f64,
    pub loss: LossKind,
    pub verbose: u8,
    pub seed: u64,
    pub parallel: bool,
    /// Record wall time in the epoch CSV. Off keeps the CSV reproducible.
    pub log_timing: bool,

    pub min_count: usize,
    pub folds: usize,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        Self {
            embedding_dim: model.embed_dim,
            hidden: model.hidden,
            seq_len: DEFAULT_SEQ_LEN,
            dropout_embed: model.dropout_embed,
            dropout_recurrent: model.dropout_recurrent,
            gate_mode: model.gate_mode,
            aggregation: model.aggregation,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.adam.learning_rate,
            beta1: train.adam.beta1,
            beta2: train.adam.beta2,
            epsilon: train.adam.epsilon,
            clip_norm: train.clip_norm.unwrap_or(0.0),
            loss: train.loss,
            verbose: train.verbose,
            seed: train.seed,
            parallel: train.parallel,
            log_timing: false,
            min_count: 1,
            folds: 5,
            data: None,
            out: None,
            checkpoint: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// `path` if given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all representable")
    }

    pub fn model_config(&self, vocab_rows: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: vocab_rows,
            embed_dim: self.embedding_dim,
            hidden: self.hidden,
            seq_len: self.seq_len,
            gate_mode: self.gate_mode,
            dropout_embed: self.dropout_embed,
            dropout_recurrent: self.dropout_recurrent,
            aggregation: self.aggregation,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            verbose: self.verbose,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            loss: self.loss,
            parallel: self.parallel,
            branches: BRANCH_ORDER.to_vec(),
            frozen: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: plstm::Error| CliError::Config(e.to_string());
        self.model_config(2).validate().map_err(bad)?;
        self.train_config().validate().map_err(bad)?;
        if self.clip_norm < 0.0 || !self.clip_norm.is_finite() {
            return Err(CliError::Config(format!(
                "clip_norm {} must be >= 0",
                self.clip_norm
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CliError::Config(
                "beta1 and beta2 must lie in [0, 1)".into(),
            ));
        }
        if self.epsilon <= 0.0 {
            return Err(CliError::Config("epsilon must be positive".into()));
        }
        if self.min_count == 0 {
            return Err(CliError::Config("min_count must be at least 1".into()));
        }
        if self.folds == 0 {
            return Err(CliError::Config("folds must be at least 1".into()));
        }
        Ok(())
    }
}
