//! Run configuration, read from TOML.
//!
//! Every field has a default, so a minimal file can be as short as
//! `episodes = 100`. See the README for the full schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::cover::PartitionBuilder;
use crate::env::{Policy, Shape};
use crate::posterior::GenConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueEnvMode {
    /// Each draw samples the true hypothesis from the prior.
    #[default]
    SampleFromPrior,
    /// Every draw uses hypothesis `true_index`.
    FixedIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    #[default]
    Uniform,
    /// Always play `baseline_action`.
    FixedAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Episodes per draw (`T`).
    pub episodes: usize,
    /// True environments averaged for the Bayesian-regret estimate.
    pub num_true_draws: usize,
    pub true_env: TrueEnvMode,
    pub true_index: Option<usize>,
    pub epsilon: f64,
    pub partition: PartitionBuilder,
    pub baseline: BaselineMode,
    pub baseline_action: usize,
    /// Also condition on the baseline trajectory's transitions.
    pub use_baseline_transitions: bool,
    /// Load hypotheses from this JSON file instead of generating them.
    pub hypotheses_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Write a per-episode posterior trace (`trace.jsonl`) per draw.
    pub trace: bool,
    pub env: GenConfig,
    pub agent: AgentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            episodes: 100,
            num_true_draws: 16,
            true_env: TrueEnvMode::SampleFromPrior,
            true_index: None,
            epsilon: 1.0,
            partition: PartitionBuilder::LgCover,
            baseline: BaselineMode::Uniform,
            baseline_action: 0,
            use_baseline_transitions: false,
            hypotheses_file: None,
            output_dir: PathBuf::from("runs/latest"),
            trace: false,
            env: GenConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))?;
        Ok(cfg)
    }

    /// Reads a config; a relative `hypotheses_file` is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        if let (Some(h), Some(dir)) = (&cfg.hypotheses_file, path.parent()) {
            if h.is_relative() {
                cfg.hypotheses_file = Some(dir.join(h));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.num_true_draws == 0 {
            return Err(Error::Config("num_true_draws must be positive".into()));
        }
        if self.true_env == TrueEnvMode::FixedIndex && self.true_index.is_none() {
            return Err(Error::Config(
                "true_env = \"fixed_index\" needs true_index".into(),
            ));
        }
        if self.hypotheses_file.is_none() {
            self.env.validate()?;
        }
        self.agent.validate()
    }

    /// The baseline policy `π_0`.
    pub fn baseline_policy(&self, shape: Shape) -> Result<Policy> {
        match self.baseline {
            BaselineMode::Uniform => Ok(Policy::uniform(shape)),
            BaselineMode::FixedAction => {
                if self.baseline_action >= shape.actions {
                    return Err(Error::Config(format!(
                        "baseline_action {} out of range for {} actions",
                        self.baseline_action, shape.actions
                    )));
                }
                Policy::deterministic(shape, &vec![self.baseline_action; shape.horizon * shape.states])
            }
        }
    }
}
