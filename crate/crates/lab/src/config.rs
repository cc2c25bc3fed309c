//! Experiment configuration files (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rsoup_core::env::{Environment, PointMassEnv, TokenSeqEnv, TokenSeqParams};
use rsoup_core::policy::{Activation, ArchSpec, Head, LogStd};
use rsoup_core::seed;
use rsoup_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Pointmass(PointMassEnv),
    Tokenseq(TokenSeqParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogStdConfig {
    Fixed(f64),
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Gaussian heads only.
    #[serde(default)]
    pub log_std: Option<LogStdConfig>,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Grid size for two rewards, endpoints included.
    pub lambda_points: usize,
    /// Uniform simplex samples for more than two rewards (plus vertices and barycenter).
    pub simplex_samples: usize,
    pub mu_points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { lambda_points: 11, simplex_samples: 50, mu_points: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Test episodes per evaluated policy.
    pub episodes: usize,
    /// Validation episodes used for choosing a soup coefficient.
    pub selection_episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: 200, selection_episodes: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub arch: ArchConfig,
    /// Proxy rewards to fine-tune on, by id.
    pub rewards: Vec<String>,
    /// The `seed` fields of the training sections are ignored; every run
    /// seed is derived from the top-level `seed`.
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("rsoup-out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let env = self.build_env().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let panel = env.reward_ids();
        if self.rewards.len() < 2 {
            return invalid("`rewards` needs at least two reward ids".into());
        }
        let unique: BTreeSet<&String> = self.rewards.iter().collect();
        if unique.len() != self.rewards.len() {
            return invalid("`rewards` contains duplicate ids".into());
        }
        for r in &self.rewards {
            if !panel.contains(r) {
                return invalid(format!("unknown reward `{r}`; this environment reports {panel:?}"));
            }
        }
        for (name, tc) in [("pretrain", &self.pretrain), ("finetune", &self.finetune)] {
            tc.validate().map_err(|e| ConfigError::Invalid(format!("[{name}]: {e}")))?;
        }
        if self.sweep.lambda_points < 2 || self.sweep.mu_points < 2 {
            return invalid("[sweep] grids need at least 2 points".into());
        }
        if self.eval.episodes == 0 || self.eval.selection_episodes == 0 {
            return invalid("[eval] episode counts must be positive".into());
        }
        let arch = self.arch_spec().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        env.check_arch(&arch).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn build_env(&self) -> rsoup_core::Result<Box<dyn Environment>> {
        Ok(match &self.env {
            EnvConfig::Pointmass(pm) => {
                pm.validate()?;
                Box::new(pm.clone())
            }
            EnvConfig::Tokenseq(params) => Box::new(TokenSeqEnv::new(*params, seed::derive(self.seed, "tokenseq"))?),
        })
    }

    pub fn arch_spec(&self) -> rsoup_core::Result<ArchSpec> {
        let (obs_dim, head) = match &self.env {
            EnvConfig::Pointmass(_) => {
                let log_std = match self.arch.log_std {
                    Some(LogStdConfig::Fixed(v)) => LogStd::Fixed(v),
                    Some(LogStdConfig::Learned) => LogStd::Learned,
                    None => LogStd::Fixed(0.0),
                };
                (2, Head::Gaussian { action_dim: 1, log_std })
            }
            EnvConfig::Tokenseq(p) => {
                if self.arch.log_std.is_some() {
                    return Err(rsoup_core::Error::Invalid("`arch.log_std` applies to Gaussian heads only".into()));
                }
                (p.prompts + p.max_len, Head::Categorical { vocab_size: p.vocab_size + 1 })
            }
        };
        let arch = ArchSpec { obs_dim, hidden: self.arch.hidden.clone(), head, activation: self.arch.activation };
        arch.validate()?;
        Ok(arch)
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
        }
        let digest = Sha256::digest(serde_json::to_vec(&v).expect("json"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Evaluation seed for reported (test) numbers.
    pub fn test_seed(&self) -> u64 {
        seed::derive(self.seed, "eval:test")
    }

    /// Evaluation seed for the selection phase; disjoint from the test seed.
    pub fn validation_seed(&self) -> u64 {
        seed::derive(self.seed, "eval:valid")
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ExperimentConfig { seed, ..self.clone() }
    }
}
