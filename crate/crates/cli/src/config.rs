//! The run configuration file (TOML) and its merge with command-line flags.
//!
//! Every key is optional; command-line flags take precedence over the file.
//! Relative paths are resolved against the working directory. The grammar is
//! documented in `docs/config.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uapg::codec::CodecSpec;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<String>,
    pub cache_dir: Option<String>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub apply: ApplySection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub metric: Option<String>,
    /// Image directory or `synthetic:seed=S,count=N,size=T`.
    pub images: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub clip_bound: Option<f64>,
    pub tile: Option<usize>,
    pub shuffle: Option<bool>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplySection {
    pub perturbation: Option<String>,
    pub input: Option<String>,
    pub amplitude: Option<f64>,
    pub csf: Option<bool>,
    pub mask_window: Option<usize>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub metric: Option<String>,
    pub input: Option<String>,
    pub budget: Option<f64>,
    pub steps: Option<usize>,
    pub step_size: Option<f64>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricEntry {
    /// `builtin:<name>` or `external:<command>`.
    pub spec: String,
    /// UAPP file trained against this metric.
    pub perturbation: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// `.y4m` paths or `synthetic:seed=S,frames=F,size=HxW[,fps=R]`.
    #[serde(default)]
    pub videos: Vec<String>,
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default)]
    pub metrics: Vec<MetricEntry>,
    pub rate_points: Option<Vec<CodecSpec>>,
    pub csf: Option<bool>,
    pub mask_window: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))
    }
}

/// Desk-scale default rate points: the mock codec at four qualities.
pub fn default_rate_points() -> Vec<CodecSpec> {
    [0.2, 0.4, 0.6, 0.8].iter().map(|&quality| CodecSpec::Mock { quality }).collect()
}
