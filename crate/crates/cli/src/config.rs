//! The run configuration shared by every subcommand and the service.
//!
//! One flat file carries reward, clipping, evaluation and toy-training keys.
//! Unknown keys and sections are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tablerl_core::config::{load_flat, parse_flat, ConfigError};
use tablerl_core::eval::EvalConfig;
use tablerl_core::{ClipConfig, RewardConfig};
use tablerl_toy::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub reward: RewardConfig,
    #[serde(flatten)]
    pub clip: ClipConfig,
    #[serde(flatten)]
    pub train: TrainConfig,
    /// pass@k values reported by `eval`.
    pub ks: Vec<usize>,
    /// Maximum concurrent judge calls.
    pub judge_max_in_flight: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalConfig::default();
        Self {
            reward: eval.reward,
            clip: ClipConfig::default(),
            train: TrainConfig::default(),
            ks: eval.ks,
            judge_max_in_flight: eval.judge_max_in_flight,
        }
    }
}

impl RunConfig {
    /// Loads `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let cfg: Self = match path {
            Some(p) => load_flat(p)?,
            None => Self::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = parse_flat(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.reward.validate().map_err(|e| invalid(e.to_string()))?;
        self.clip.validate().map_err(|e| invalid(e.to_string()))?;
        self.train.validate().map_err(|e| invalid(e.to_string()))?;
        if self.ks.contains(&0) {
            return Err(invalid("ks must be positive".into()));
        }
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            reward: self.reward.clone(),
            ks: self.ks.clone(),
            judge_max_in_flight: self.judge_max_in_flight,
        }
    }
}
