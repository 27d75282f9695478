//! `FZNET1` checkpoints: the 6-byte magic `FZNET1`, a `u32` LE manifest
//! length, a JSON manifest, then every parameter as little-endian `f64`
//! values in manifest order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::modelzoo::config::ModelConfig;
use crate::modelzoo::model::Model;
use crate::scalar::Scalar;
use crate::synthdata::{Catalog, FeatureSpec};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"FZNET1";
const PREFIX: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub config: ModelConfig,
    pub features: Vec<FeatureSpec>,
    pub seed: u64,
    pub params: Vec<ParamEntry>,
    /// Free-form run metadata.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl<T: Scalar> Model<T> {
    pub fn manifest(&self, meta: BTreeMap<String, String>) -> CheckpointManifest {
        CheckpointManifest {
            config: self.config().clone(),
            features: self.specs().to_vec(),
            seed: self.seed(),
            params: self
                .params()
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    trainable: p.trainable,
                })
                .collect(),
            meta,
        }
    }

    pub fn to_checkpoint_bytes(&self, meta: BTreeMap<String, String>) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.manifest(meta))
            .map_err(|e| Error::Contract(format!("manifest serialization: {e}")))?;
        let len = u32::try_from(json.len())
            .map_err(|_| Error::Contract("checkpoint manifest too large".into()))?;
        let mut out = Vec::with_capacity(PREFIX + json.len() + self.param_count() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.params().iter() {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path, meta: BTreeMap<String, String>) -> Result<()> {
        fs::write(path, self.to_checkpoint_bytes(meta)?)?;
        Ok(())
    }

    /// Rebuilds the architecture from the manifest and restores every value.
    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<(Self, CheckpointManifest)> {
        if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..6] != CHECKPOINT_MAGIC {
            return Err(Error::format(0, "not an FZNET1 checkpoint"));
        }
        if bytes.len() < PREFIX {
            return Err(Error::format(
                bytes.len() as u64,
                "truncated checkpoint header",
            ));
        }
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let json_end = PREFIX
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::format(6, format!("manifest length {len} exceeds file")))?;
        let manifest: CheckpointManifest = serde_json::from_slice(&bytes[PREFIX..json_end])
            .map_err(|e| Error::format(PREFIX as u64, format!("bad manifest: {e}")))?;
        let mut model = Model::build(
            &manifest.config,
            &Catalog::from_specs(manifest.features.clone()),
            manifest.seed,
        )
        .map_err(|e| {
            Error::format(
                PREFIX as u64,
                format!("manifest does not describe a model: {e}"),
            )
        })?;
        if model.specs() != manifest.features.as_slice() {
            return Err(Error::format(
                PREFIX as u64,
                "feature list does not match the config",
            ));
        }
        let built = model.manifest(BTreeMap::new()).params;
        if built.len() != manifest.params.len() {
            return Err(Error::format(
                PREFIX as u64,
                format!(
                    "{} parameters recorded, architecture has {}",
                    manifest.params.len(),
                    built.len()
                ),
            ));
        }
        for (b, m) in built.iter().zip(&manifest.params) {
            if b.name != m.name || b.shape != m.shape {
                return Err(Error::format(
                    PREFIX as u64,
                    format!(
                        "parameter `{}` {:?} does not match `{}` {:?}",
                        m.name, m.shape, b.name, b.shape
                    ),
                ));
            }
        }
        let mut offset = json_end;
        for (p, entry) in model.params_mut().iter_mut().zip(&manifest.params) {
            let n = p.value.len() * 8;
            if offset + n > bytes.len() {
                return Err(Error::format(
                    bytes.len() as u64,
                    format!("truncated data for `{}`", p.name),
                ));
            }
            let data = bytes[offset..offset + n]
                .chunks_exact(8)
                .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
                .collect();
            p.value = Tensor::new(entry.shape.clone(), data)?;
            p.trainable = entry.trainable;
            offset += n;
        }
        if offset != bytes.len() {
            return Err(Error::format(
                offset as u64,
                "trailing bytes after parameter data",
            ));
        }
        Ok((model, manifest))
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointManifest)> {
        Self::from_checkpoint_bytes(&fs::read(path)?)
    }
}
