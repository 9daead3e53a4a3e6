//! Resolved run settings: built-in defaults, then the TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use scurank_core::analysis::SummarySource;
use scurank_core::embedding::Metric;
use scurank_core::extraction::PROMPT_VERSION;
use scurank_core::metrics::AlphaLevel;
use scurank_core::scoring::{LengthPenalty, ScoreTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Offline,
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Offline,
    #[default]
    Llm,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub backend: EncoderKind,
    pub endpoint: String,
    /// Defaults to the backend's own model id.
    pub model: Option<String>,
    /// Defaults to 768 for the bridge and 256 offline.
    pub dimension: Option<usize>,
    pub offline_seed: u64,
    pub batch_size: usize,
    pub normalize: bool,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        Self {
            backend: EncoderKind::Offline,
            endpoint: "http://127.0.0.1:8765".into(),
            model: None,
            dimension: None,
            offline_seed: 0,
            batch_size: 64,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSettings {
    pub backend: ExtractorKind,
    pub base_url: String,
    pub model: String,
    pub shots: u8,
    pub temperature: f64,
    pub prompt_version: String,
    pub max_attempts: u32,
    /// JSONL of `{"input", "output"}` pairs; 3-shot prompts need two.
    pub examples: Option<PathBuf>,
}

impl Default for ExtractorSettings {
    fn default() -> Self {
        Self {
            backend: ExtractorKind::Llm,
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            shots: 1,
            temperature: 0.0,
            prompt_version: PROMPT_VERSION.into(),
            max_attempts: 5,
            examples: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSettings {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub epsilon: f64,
    pub metric: Metric,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            min_samples: 2,
            epsilon: 0.15,
            metric: Metric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSettings {
    pub transform: ScoreTransform,
    pub penalty: LengthPenalty,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySettings {
    pub runs: usize,
    pub shuffle: bool,
    pub alpha_level: AlphaLevel,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        Self {
            runs: 5,
            shuffle: false,
            alpha_level: AlphaLevel::Ordinal,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub seed: u64,
    pub encoder: EncoderSettings,
    pub extractor: ExtractorSettings,
    pub clustering: ClusteringSettings,
    pub scoring: ScoringSettings,
    pub stability: StabilitySettings,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.stability.runs < 2 {
            bail!("stability runs must be at least 2");
        }
        if self.encoder.batch_size == 0 {
            bail!("encoder batch_size must be positive");
        }
        Ok(())
    }
}

/// Accepts the serde spelling of an enum, with `-` allowed for `_`.
pub fn parse_snake<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|e| e.to_string())
}

pub fn parse_source(s: &str) -> Result<SummarySource, String> {
    parse_snake(s)
}
