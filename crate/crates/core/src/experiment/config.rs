//! Declarative experiment configuration (TOML).
//!
//! Every key has a default except `dataset.path`; the defaults are the
//! MNIST setting (50-D latent, 1024-wide hidden layers, lr 0.002, batch
//! 128, Adam betas 0 / 0.99). Unknown keys are errors, and all problems in
//! a file are reported together.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{SplitMode, SW_SPLIT_SEED};
use crate::model_zoo::{Architecture, MlpArch, StyleArch};
use crate::objectives::R1Target;
use crate::trainer::{AdamConfig, MixingPolicy, Schedule, TrainConfig};

/// Images seen by the default MNIST run (about 7800 iterations of 128).
pub const MNIST_TRAINING_IMAGES: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Mlp,
    Style,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Used when `kind = "mlp"`.
    pub mlp: MlpArch,
    /// Used when `kind = "style"`.
    pub style: StyleArch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// R1 weight.
    pub gamma: f64,
    pub r1_target: R1Target,
    pub reset_on_growth: bool,
    /// Learning-rate multiplier of the mapper F.
    pub mapper_lr_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let train = TrainConfig::default();
        OptimizerConfig {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            gamma: train.gamma,
            r1_target: train.r1_target,
            reset_on_growth: train.reset_optimizer_on_growth,
            mapper_lr_scale: train.mapper_lr_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub transition_images: u64,
    pub stabilization_images: u64,
    /// Highest level trained (0 for the MLP).
    pub max_level: usize,
    /// Per level; the last entry repeats.
    pub batch_sizes: Vec<usize>,
    /// Per-level learning rates; defaults to `optimizer.lr` everywhere.
    pub learning_rates: Option<Vec<f64>>,
    pub total_images: Option<u64>,
    pub mixing_probability: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            transition_images: 0,
            stabilization_images: MNIST_TRAINING_IMAGES,
            max_level: 0,
            batch_sizes: vec![128],
            learning_rates: None,
            total_images: None,
            mixing_probability: MixingPolicy::default().probability,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// IDX files of the MNIST distribution.
    #[default]
    Mnist,
    /// A directory of square images with a manifest.
    Images,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub path: Option<PathBuf>,
    pub split: SplitMode,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: DatasetKind::Mnist,
            path: None,
            split: SplitMode::Sw,
            split_seed: SW_SPLIT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Iterations between `latest.ckpt` snapshots (0: only at the end).
    pub checkpoint_every: u64,
    /// Iterations between progress log lines.
    pub log_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            checkpoint_every: 1000,
            log_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Where checkpoints, logs and artifacts go.
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub dataset: DatasetConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Parses and validates. Unknown keys and invalid values are collected
    /// into a single [`ConfigError::Schema`].
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut problems: Vec<String> = unknown.into_iter().map(|k| format!("{k}: unknown key")).collect();
        problems.extend(cfg.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Schema(problems))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// Value-level checks; each entry names the offending key.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                p.push(msg.to_string());
            }
        };
        check(self.seed <= i64::MAX as u64, "seed: must fit in a signed 64-bit integer");
        let o = &self.optimizer;
        check(o.lr > 0.0 && o.lr.is_finite(), "optimizer.lr: must be positive");
        check((0.0..1.0).contains(&o.beta1), "optimizer.beta1: must be in [0, 1)");
        check((0.0..1.0).contains(&o.beta2), "optimizer.beta2: must be in [0, 1)");
        check(o.eps > 0.0, "optimizer.eps: must be positive");
        check(o.gamma >= 0.0 && o.gamma.is_finite(), "optimizer.gamma: must be non-negative");
        check(
            o.mapper_lr_scale > 0.0 && o.mapper_lr_scale.is_finite(),
            "optimizer.mapper_lr_scale: must be positive",
        );

        let s = &self.schedule;
        check(
            !s.batch_sizes.is_empty() && s.batch_sizes.iter().all(|&b| b > 0),
            "schedule.batch_sizes: must be a non-empty list of positive sizes",
        );
        if let Some(lrs) = &s.learning_rates {
            check(
                !lrs.is_empty() && lrs.iter().all(|&l| l > 0.0 && l.is_finite()),
                "schedule.learning_rates: must be a non-empty list of positive rates",
            );
        }
        check(s.stabilization_images > 0, "schedule.stabilization_images: must be positive");
        check(
            s.max_level == 0 || s.transition_images > 0,
            "schedule.transition_images: must be positive when growing",
        );
        check(
            (0.0..=1.0).contains(&s.mixing_probability),
            "schedule.mixing_probability: must be in [0, 1]",
        );

        match self.model.kind {
            ModelKind::Mlp => {
                let m = &self.model.mlp;
                check(
                    m.latent_dim > 0 && m.hidden_dim > 0 && m.data_dim > 0,
                    "model.mlp: dimensions must be positive",
                );
                check(m.mapping_layers > 0 && m.disc_layers > 0, "model.mlp: depths must be positive");
                check(s.max_level == 0, "schedule.max_level: the mlp model has a single level");
                check(
                    self.dataset.kind == DatasetKind::Mnist,
                    "dataset.kind: the mlp model trains on flat vectors (mnist)",
                );
            }
            ModelKind::Style => {
                let m = &self.model.style;
                check(m.latent_dim > 0, "model.style.latent_dim: must be positive");
                check(m.mapping_layers > 0 && m.disc_layers > 0, "model.style: depths must be positive");
                check(
                    m.image_channels == 1 || m.image_channels == 3,
                    "model.style.image_channels: must be 1 or 3",
                );
                check(
                    m.min_channels > 0 && m.min_channels <= m.max_channels,
                    "model.style: need 0 < min_channels <= max_channels",
                );
                check(
                    s.max_level <= m.max_level,
                    "schedule.max_level: exceeds model.style.max_level",
                );
                check(
                    self.dataset.kind == DatasetKind::Images,
                    "dataset.kind: the style model trains on image directories (images)",
                );
            }
        }
        check(self.dataset.path.is_some(), "dataset.path: required");
        p
    }

    pub fn architecture(&self) -> Architecture {
        match self.model.kind {
            ModelKind::Mlp => Architecture::Mlp(self.model.mlp.clone()),
            ModelKind::Style => Architecture::Style(self.model.style.clone()),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let o = &self.optimizer;
        let s = &self.schedule;
        TrainConfig {
            adam: AdamConfig {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
            },
            gamma: o.gamma,
            r1_target: o.r1_target,
            mixing: MixingPolicy {
                probability: s.mixing_probability,
            },
            schedule: Schedule {
                transition_images: s.transition_images,
                stabilization_images: s.stabilization_images,
                max_level: s.max_level,
                batch_sizes: s.batch_sizes.clone(),
                learning_rates: s.learning_rates.clone().unwrap_or_else(|| vec![o.lr]),
                total_images: s.total_images,
            },
            reset_optimizer_on_growth: o.reset_on_growth,
            mapper_lr_scale: o.mapper_lr_scale,
        }
    }
}
