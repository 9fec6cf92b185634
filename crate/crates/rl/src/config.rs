//! Run configuration: one JSON document plus `WORDACT__SECTION__KEY` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use wordact_core::acts::AtomicAct;
use wordact_core::text::END_ID;
use wordact_core::{Database, DialogueEnv, RewardConfig, Schema};
use wordact_neural::ModelConfig;

use crate::candidate::DEFAULT_CUTOFF;
use crate::corpus::ExpertDataConfig;
use crate::error::{Result, RlError};
use crate::ppo::PpoConfig;
use crate::warmup::WarmupConfig;

pub const ENV_PREFIX: &str = "WORDACT__";

/// Model sizes; the vocabulary size always comes from the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden_size: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_size: usize,
    pub max_decode_len: usize,
    pub max_text_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self::from_config(&ModelConfig::reference(0))
    }
}

impl ModelSection {
    pub fn from_config(c: &ModelConfig) -> Self {
        ModelSection {
            hidden_size: c.hidden_size,
            layers: c.layers,
            heads: c.heads,
            ff_size: c.ff_size,
            max_decode_len: c.max_decode_len,
            max_text_len: c.max_text_len,
        }
    }

    pub fn desk() -> Self {
        Self::from_config(&ModelConfig::desk(0))
    }

    /// Vocabulary size is left at 0; policies fill it from their codec.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: 0,
            hidden_size: self.hidden_size,
            layers: self.layers,
            heads: self.heads,
            ff_size: self.ff_size,
            max_decode_len: self.max_decode_len,
            max_text_len: self.max_text_len,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Word,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_seed: u64,
    pub valid_seed: u64,
    /// Act templates left out of the expert corpus.
    pub exclude: Vec<Vec<AtomicAct>>,
    pub candidate_cutoff: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_seed: 11,
            valid_seed: 12,
            exclude: Vec::new(),
            candidate_cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl DataConfig {
    pub fn expert_options(&self) -> ExpertDataConfig {
        ExpertDataConfig {
            exclude: self.exclude.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: 200, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Schema and database files; the bundled toy pair when absent.
    pub schema: Option<PathBuf>,
    pub database: Option<PathBuf>,
    pub policy: PolicyKind,
    /// Parameter initialization seed.
    pub seed: u64,
    pub model: ModelSection,
    pub reward: RewardConfig,
    pub warmup: WarmupConfig,
    pub ppo: PpoConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: None,
            database: None,
            policy: PolicyKind::Word,
            seed: 0,
            model: ModelSection::default(),
            reward: RewardConfig::default(),
            warmup: WarmupConfig::default(),
            ppo: PpoConfig::default(),
            data: DataConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    /// Single-core scale: small model, 2K expert turns, 5K PPO frames and
    /// learning rates raised to match the shorter run.
    pub fn desk() -> Self {
        RunConfig {
            model: ModelSection::desk(),
            warmup: WarmupConfig {
                train_turns: 2_000,
                valid_turns: 500,
                ..WarmupConfig::default()
            },
            ppo: PpoConfig {
                actor_lr: 1e-4,
                critic_lr: 1e-3,
                total_frames: 5_000,
                eval_every_frames: 1_000,
                eval_episodes: 200,
                ..PpoConfig::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.warmup.validate()?;
        self.ppo.validate()?;
        // Sizes only: any vocabulary holding the special tokens will do here.
        ModelConfig {
            vocab_size: END_ID as usize + 1,
            ..self.model.model_config()
        }
        .validate()?;
        if self.eval.episodes == 0 {
            return Err(RlError::Config("eval.episodes must be positive".into()));
        }
        if self.data.candidate_cutoff == 0 {
            return Err(RlError::Config("data.candidate_cutoff must be positive".into()));
        }
        let r = &self.reward;
        if r.max_turns < 2 || r.max_turns % 2 != 0 {
            return Err(RlError::Config("reward.max_turns must be even and at least 2".into()));
        }
        if !(r.lambda > 0.0) {
            return Err(RlError::Config("reward.lambda must be positive".into()));
        }
        if !(0.0..=1.0).contains(&r.gamma) {
            return Err(RlError::Config("reward.gamma must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Parses `text` (empty means all defaults), applies overrides, validates.
    pub fn from_json_with_overrides(
        text: &str,
        overrides: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut doc: Value = if text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(text).map_err(|e| RlError::Config(format!("config is not valid JSON: {e}")))?
        };
        apply_overrides(&mut doc, overrides)?;
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| RlError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (defaults when `None`) and applies `WORDACT__…` variables from the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| RlError::io(p, e))?,
            None => String::new(),
        };
        Self::from_json_with_overrides(&text, std::env::vars())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_env(&self) -> Result<DialogueEnv> {
        let schema = match &self.schema {
            Some(p) => Schema::load(p)?,
            None => Schema::toy(),
        };
        let db = match &self.database {
            Some(p) => Database::load(p, &schema)?,
            None => Database::toy(&schema),
        };
        Ok(DialogueEnv::new(schema, db, self.reward))
    }
}

/// Applies `WORDACT__SECTION__KEY=value` pairs; other variables are ignored.
/// Values parse as JSON when they can and are taken as strings otherwise.
pub fn apply_overrides(doc: &mut Value, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_ascii_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(RlError::Config(format!("malformed override variable {key}")));
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let mut node = &mut *doc;
        for (i, part) in path.iter().enumerate() {
            let Value::Object(map) = node else {
                return Err(RlError::Config(format!("override {key}: `{}` is not a section", path[..i].join("."))));
            };
            if i + 1 == path.len() {
                map.insert(part.clone(), value.clone());
                break;
            }
            node = map
                .entry(part.clone())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}
