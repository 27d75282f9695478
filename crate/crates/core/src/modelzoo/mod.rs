//! The model zoo: ten single-feature networks and five fusion networks,
//! prediction, modality attention reports and checkpoints.

mod checkpoint;
mod config;
mod model;
mod network;
mod report;

pub use checkpoint::{CheckpointManifest, ParamEntry, CHECKPOINT_MAGIC};
pub use config::{
    normalize_scaling, parse_rmse_file, reciprocal_scaling, ModelConfig, ModelKind,
    FUSION_MODALITIES, SINGLE_FEATURE_MODELS,
};
pub use model::{build_fusion_model, build_single_feature_model, Model};
pub use network::Forward;
pub use report::{attention_ratios, AttentionReport};

/// Every architecture of the zoo: the single-feature models followed by the
/// five fusion models.
pub fn zoo() -> Vec<ModelConfig> {
    SINGLE_FEATURE_MODELS
        .iter()
        .map(|f| ModelConfig::single(f))
        .chain(ModelKind::ALL[1..].iter().map(|&k| ModelConfig::fusion(k)))
        .collect()
}
