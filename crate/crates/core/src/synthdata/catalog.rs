use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Video,
    Audio,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Video, Modality::Audio, Modality::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Audio => "audio",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "video" => Ok(Modality::Video),
            "audio" => Ok(Modality::Audio),
            "text" => Ok(Modality::Text),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

/// Geometry of one input stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub dim: usize,
    /// Sampling rate; `None` for sentence-level text embeddings.
    pub rate_hz: Option<f64>,
    pub timesteps: usize,
    pub modality: Modality,
}

impl FeatureSpec {
    pub fn new(
        name: &str,
        dim: usize,
        rate_hz: Option<f64>,
        timesteps: usize,
        modality: Modality,
    ) -> Self {
        Self {
            name: name.to_string(),
            dim,
            rate_hz,
            timesteps,
            modality,
        }
    }

    /// Timestep count after dividing by `divisor`, rounded up.
    pub fn scaled(&self, divisor: usize) -> Self {
        Self {
            timesteps: self.timesteps.div_ceil(divisor.max(1)),
            ..self.clone()
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.timesteps, self.dim]
    }
}

/// The E-DAIC feature geometry: every stream the models can consume.
pub fn feature_catalog() -> Vec<FeatureSpec> {
    use Modality::*;
    vec![
        FeatureSpec::new("mfcc_funct", 78, Some(1.0), 1300, Audio),
        FeatureSpec::new("egemaps_funct", 88, Some(1.0), 1410, Audio),
        FeatureSpec::new("mfcc_lld", 39, Some(100.0), 140_500, Audio),
        FeatureSpec::new("egemaps_lld", 23, Some(100.0), 140_500, Audio),
        FeatureSpec::new("boaw_mfcc", 100, Some(10.0), 14_050, Audio),
        FeatureSpec::new("boaw_egemaps", 100, Some(10.0), 14_050, Audio),
        FeatureSpec::new("ds_densenet", 1920, Some(1.0), 1415, Audio),
        FeatureSpec::new("pose_lld", 6, Some(10.0), 15_000, Video),
        FeatureSpec::new("gaze_lld", 8, Some(10.0), 15_000, Video),
        FeatureSpec::new("fau_lld", 35, Some(10.0), 15_000, Video),
        FeatureSpec::new("bovw", 100, Some(10.0), 15_000, Video),
        FeatureSpec::new("text_use", 512, None, 400, Text),
    ]
}

/// A set of feature specs addressable by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    specs: Vec<FeatureSpec>,
}

impl Default for Catalog {
    fn default() -> Self {
        Self::full()
    }
}

impl Catalog {
    pub fn full() -> Self {
        Self {
            specs: feature_catalog(),
        }
    }

    pub fn from_specs(specs: Vec<FeatureSpec>) -> Self {
        Self { specs }
    }

    pub fn scaled(&self, divisor: usize) -> Self {
        Self {
            specs: self.specs.iter().map(|s| s.scaled(divisor)).collect(),
        }
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn lookup(&self, name: &str) -> Result<&FeatureSpec> {
        self.specs.iter().find(|s| s.name == name).ok_or_else(|| {
            Error::Config(format!(
                "unknown feature `{name}`; valid features: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.specs.iter().map(|s| s.name.as_str()).collect()
    }

    /// Number of catalog features belonging to `modality`.
    pub fn modality_count(&self, modality: Modality) -> usize {
        self.specs.iter().filter(|s| s.modality == modality).count()
    }
}
