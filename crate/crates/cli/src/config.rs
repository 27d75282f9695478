//! Run configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::fs;
use std::path::{Path, PathBuf};

use fuznet::synthdata::SignalStrength;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub scale_divisor: Option<usize>,
    pub generate: GenerateSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub report_attention: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs"),
            scale_divisor: None,
            generate: GenerateSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            report_attention: EvalSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub features: Option<Vec<String>>,
    pub strength: SignalStrength,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            n_train: 163,
            n_dev: 56,
            n_test: 56,
            features: None,
            strength: SignalStrength::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub corpus: Option<PathBuf>,
    pub model: String,
    /// Empty means the model kind's default features.
    pub features: Vec<String>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub freeze_scaling: bool,
    /// `uniform` or `from-rmse-file:PATH`.
    pub scaling_init: String,
    pub hidden_size: usize,
    pub ffn_widths: Vec<usize>,
    pub fusion_ffn_width: usize,
    pub fused_len: usize,
    pub attention_size: Option<usize>,
    pub clip_norm: Option<f64>,
    pub keep_best: bool,
    pub init_output_bias: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let model = fuznet::modelzoo::ModelConfig::default();
        let train = fuznet::training::TrainConfig::default();
        Self {
            corpus: None,
            model: "single".into(),
            features: Vec::new(),
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            freeze_scaling: false,
            scaling_init: "uniform".into(),
            hidden_size: model.hidden_size,
            ffn_widths: model.ffn_widths,
            fusion_ffn_width: model.fusion_ffn_width,
            fused_len: model.fused_len,
            attention_size: None,
            clip_norm: train.clip_norm,
            keep_best: true,
            init_output_bias: train.init_output_bias,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub checkpoint: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub partition: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            checkpoint: None,
            corpus: None,
            partition: "dev".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}
