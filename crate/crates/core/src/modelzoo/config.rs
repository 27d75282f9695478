use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::{Catalog, FeatureSpec, Modality};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SingleFeature,
    #[serde(rename = "videolld_fused")]
    VideoLldFused,
    #[serde(rename = "video_bovw_fused")]
    VideoBovwFused,
    VideoTextFused,
    AudioTextFused,
    AllFeatureFusion,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::SingleFeature,
        ModelKind::VideoLldFused,
        ModelKind::VideoBovwFused,
        ModelKind::VideoTextFused,
        ModelKind::AudioTextFused,
        ModelKind::AllFeatureFusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SingleFeature => "single",
            ModelKind::VideoLldFused => "videolld_fused",
            ModelKind::VideoBovwFused => "video_bovw_fused",
            ModelKind::VideoTextFused => "video_text_fused",
            ModelKind::AudioTextFused => "audio_text_fused",
            ModelKind::AllFeatureFusion => "all_fusion",
        }
    }

    /// Features consumed when none are given explicitly.
    pub fn default_features(self) -> &'static [&'static str] {
        const VIDEO_LLD: &[&str] = &["gaze_lld", "pose_lld", "fau_lld"];
        match self {
            ModelKind::SingleFeature => &["text_use"],
            ModelKind::VideoLldFused => VIDEO_LLD,
            ModelKind::VideoBovwFused => &["gaze_lld", "pose_lld", "fau_lld", "bovw"],
            ModelKind::VideoTextFused => &["gaze_lld", "pose_lld", "fau_lld", "bovw", "text_use"],
            ModelKind::AudioTextFused => &["mfcc_funct", "text_use"],
            ModelKind::AllFeatureFusion => &[
                "gaze_lld",
                "pose_lld",
                "fau_lld",
                "bovw",
                "mfcc_funct",
                "egemaps_funct",
                "text_use",
            ],
        }
    }

    /// Modalities that must (`true`) or must not (`false`) be present.
    fn requirements(self) -> [(Modality, bool); 3] {
        use Modality::*;
        match self {
            ModelKind::SingleFeature => unreachable!("single-feature models take any modality"),
            ModelKind::VideoLldFused | ModelKind::VideoBovwFused => {
                [(Video, true), (Audio, false), (Text, false)]
            }
            ModelKind::VideoTextFused => [(Video, true), (Audio, false), (Text, true)],
            ModelKind::AudioTextFused => [(Video, false), (Audio, true), (Text, true)],
            ModelKind::AllFeatureFusion => [(Video, true), (Audio, true), (Text, true)],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "single" | "single_feature" => ModelKind::SingleFeature,
            "videolld_fused" | "video_lld_fused" => ModelKind::VideoLldFused,
            "video_bovw_fused" => ModelKind::VideoBovwFused,
            "video_text_fused" => ModelKind::VideoTextFused,
            "audio_text_fused" => ModelKind::AudioTextFused,
            "all_fusion" | "all_feature_fusion" => ModelKind::AllFeatureFusion,
            _ => {
                let valid: Vec<_> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
                return Err(Error::Config(format!(
                    "unknown model `{s}`; valid models: {}",
                    valid.join(", ")
                )));
            }
        };
        Ok(k)
    }
}

/// The ten single-feature models of the per-feature comparison.
pub const SINGLE_FEATURE_MODELS: [&str; 10] = [
    "mfcc_funct",
    "egemaps_funct",
    "boaw_mfcc",
    "boaw_egemaps",
    "ds_densenet",
    "pose_lld",
    "gaze_lld",
    "fau_lld",
    "bovw",
    "text_use",
];

/// Order of the modality axis in all-feature fusion.
pub const FUSION_MODALITIES: [Modality; 3] = [Modality::Video, Modality::Audio, Modality::Text];

/// Declarative description of one architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub features: Vec<String>,
    pub hidden_size: usize,
    pub ffn_widths: Vec<usize>,
    pub fusion_ffn_width: usize,
    /// Common length that streams are window-pooled to before per-step fusion.
    pub fused_len: usize,
    /// Attention scoring width; the attended dimension when `None`.
    pub attention_size: Option<usize>,
    /// Per-modality multipliers (video, audio, text) for all-feature fusion;
    /// uniform when `None`. Normalized to sum to 1 at build time.
    pub scaling_init: Option<Vec<f64>>,
    pub freeze_scaling: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::SingleFeature,
            features: vec!["text_use".into()],
            hidden_size: 200,
            ffn_widths: vec![500, 100, 60, 1],
            fusion_ffn_width: 128,
            fused_len: 100,
            attention_size: None,
            scaling_init: None,
            freeze_scaling: false,
        }
    }
}

impl ModelConfig {
    pub fn single(feature: &str) -> Self {
        Self {
            features: vec![feature.to_string()],
            ..Self::default()
        }
    }

    pub fn fusion(kind: ModelKind) -> Self {
        Self {
            kind,
            features: kind
                .default_features()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ..Self::default()
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden_size = hidden;
        self
    }

    /// Resolves the consumed features against `catalog` and checks the
    /// structural invariants of the kind.
    pub fn resolve(&self, catalog: &Catalog) -> Result<Vec<FeatureSpec>> {
        if self.features.is_empty() {
            return Err(Error::Config("model needs at least one feature".into()));
        }
        let mut specs: Vec<FeatureSpec> = Vec::with_capacity(self.features.len());
        for name in &self.features {
            let spec = catalog.lookup(name)?;
            if specs.iter().any(|s| s.name == spec.name) {
                return Err(Error::Config(format!("feature `{name}` listed twice")));
            }
            specs.push(spec.clone());
        }
        if self.hidden_size == 0 || self.fusion_ffn_width == 0 || self.fused_len == 0 {
            return Err(Error::Config(
                "hidden_size, fusion_ffn_width and fused_len must be >= 1".into(),
            ));
        }
        if self.attention_size == Some(0) {
            return Err(Error::Config("attention_size must be >= 1".into()));
        }
        if self.ffn_widths.last() != Some(&1) || self.ffn_widths.contains(&0) {
            return Err(Error::Config(format!(
                "ffn_widths must be positive and end in 1, got {:?}",
                self.ffn_widths
            )));
        }
        match self.kind {
            ModelKind::SingleFeature => {
                if specs.len() != 1 {
                    return Err(Error::Config(format!(
                        "single-feature model takes exactly one feature, got {}",
                        specs.len()
                    )));
                }
            }
            kind => {
                for (m, required) in kind.requirements() {
                    let present = specs.iter().any(|s| s.modality == m);
                    if present != required {
                        return Err(Error::Config(format!(
                            "{kind} {} {m} features",
                            if required {
                                "requires"
                            } else {
                                "does not accept"
                            }
                        )));
                    }
                }
            }
        }
        if let Some(s) = &self.scaling_init {
            if self.kind != ModelKind::AllFeatureFusion {
                return Err(Error::Config(
                    "scaling_init only applies to all_fusion".into(),
                ));
            }
            normalize_scaling(s)?;
        }
        Ok(specs)
    }
}

/// Scales positive multipliers to sum to 1.
pub fn normalize_scaling(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != FUSION_MODALITIES.len() {
        return Err(Error::Config(format!(
            "scaling vector needs {} entries (video, audio, text), got {}",
            FUSION_MODALITIES.len(),
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Config(format!(
            "scaling entries must be positive, got {values:?}"
        )));
    }
    let total: f64 = values.iter().sum();
    Ok(values.iter().map(|v| v / total).collect())
}

/// Normalized reciprocals of per-modality RMSEs.
pub fn reciprocal_scaling(rmse: &[f64]) -> Result<Vec<f64>> {
    if rmse.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Config(format!(
            "RMSE values must be positive, got {rmse:?}"
        )));
    }
    let inv: Vec<f64> = rmse.iter().map(|v| 1.0 / v).collect();
    normalize_scaling(&inv)
}

/// Parses `video=.., audio=.., text=..` lines into modality-ordered RMSEs.
pub fn parse_rmse_file(text: &str) -> Result<Vec<f64>> {
    let mut found: [Option<f64>; 3] = [None; 3];
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected modality=rmse, got `{line}`")))?;
        let m: Modality = k.trim().parse()?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad RMSE value in `{line}`")))?;
        let slot = FUSION_MODALITIES.iter().position(|x| *x == m).unwrap();
        if found[slot].replace(v).is_some() {
            return Err(Error::Config(format!("modality `{m}` given twice")));
        }
    }
    found
        .iter()
        .zip(FUSION_MODALITIES)
        .map(|(v, m)| v.ok_or_else(|| Error::Config(format!("RMSE file lacks `{m}`"))))
        .collect()
}
