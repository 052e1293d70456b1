//! JSON configuration file and its merge with command-line flags.

use std::path::{Path, PathBuf};

use gtnm_core::corpus::{LengthConfig, SplitMode};
use gtnm_core::gtnm::ModelConfig;
use gtnm_core::runtime::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Fail;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 6 layers, d_model 512, 8 heads, d_ff 2048.
    #[default]
    Base,
    /// 2 layers, d_model 64, 4 heads, d_ff 256.
    Desk,
}

/// Every key is optional; flags override keys, keys override defaults.
/// `lengths`, `model`, and `train` may set any subset of their fields.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<Preset>,
    pub lengths: Option<Value>,
    pub model: Option<Value>,
    pub train: Option<Value>,
    pub use_crossfile: Option<bool>,
    pub require_doc: Option<bool>,
    pub split_mode: Option<SplitMode>,
    pub split_ratios: Option<[f64; 3]>,
    pub beam_width: Option<usize>,
    pub seed: Option<u64>,
    pub code_vocab_size: Option<usize>,
    pub doc_vocab_size: Option<usize>,
    pub project: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub vocab_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Fail> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Fail::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Fail::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn lengths(&self) -> Result<LengthConfig, Fail> {
        let lengths: LengthConfig = overlay(LengthConfig::default(), self.lengths.as_ref(), "lengths")?;
        lengths.validate()?;
        Ok(lengths)
    }

    /// Preset, then the file's `model` keys; `lengths` replaces the
    /// model's context lengths.
    pub fn model(&self, preset: Option<Preset>) -> Result<ModelConfig, Fail> {
        let base = match preset.or(self.preset).unwrap_or_default() {
            Preset::Base => ModelConfig::default(),
            Preset::Desk => ModelConfig::desk(),
        };
        let mut cfg: ModelConfig = overlay(base, self.model.as_ref(), "model")?;
        if self.lengths.is_some() {
            cfg.lengths = self.lengths()?;
        }
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig, Fail> {
        overlay(TrainConfig::default(), self.train.as_ref(), "train")
    }
}

/// `base` with the keys of `patch` written over it.
fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: Option<&Value>, what: &str) -> Result<T, Fail> {
    let Some(patch) = patch else {
        return Ok(base);
    };
    let Value::Object(keys) = patch else {
        return Err(Fail::Usage(format!("config `{what}` must be an object")));
    };
    let mut merged = serde_json::to_value(base).map_err(|e| Fail::Runtime(e.into()))?;
    let Value::Object(fields) = &mut merged else {
        return Err(Fail::Usage(format!("config `{what}` is not a record")));
    };
    for (k, v) in keys {
        if !fields.contains_key(k) {
            return Err(Fail::Usage(format!("config `{what}` has unknown key `{k}`")));
        }
        fields.insert(k.clone(), v.clone());
    }
    serde_json::from_value(merged).map_err(|e| Fail::Usage(format!("config `{what}`: {e}")))
}

/// First of flag, file value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// First of flag and file value; a usage error naming `flag` when neither
/// is set.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, Fail> {
    flag.or(file).ok_or_else(|| Fail::Usage(format!("missing required --{name}")))
}
