use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{mix_label, SeededRng};
use crate::scalar::Scalar;
use crate::synthdata::catalog::{Catalog, FeatureSpec, Modality};

pub const PHQ8_MAX: u8 = 24;

/// Fraction of each sequence that carries the planted signal.
pub const WINDOW_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Dev, Partition::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(Error::Config(format!("unknown partition `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionRecord {
    pub session_id: String,
    pub partition: Partition,
    pub phq8: u8,
    pub features: BTreeMap<String, Tensor<f64>>,
}

impl SessionRecord {
    pub fn feature(&self, name: &str) -> Result<&Tensor<f64>> {
        self.features.get(name).ok_or_else(|| Error::Input {
            feature: name.to_string(),
            msg: format!("missing from session {}", self.session_id),
        })
    }

    /// Checks every stored matrix against `catalog`.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        if self.phq8 > PHQ8_MAX {
            return Err(Error::domain(
                "session",
                format!("phq8 {} out of range", self.phq8),
            ));
        }
        for (name, m) in &self.features {
            let spec = catalog.lookup(name)?;
            if m.shape() != spec.shape() {
                return Err(Error::Input {
                    feature: name.clone(),
                    msg: format!("shape {:?}, expected {:?}", m.shape(), spec.shape()),
                });
            }
        }
        Ok(())
    }
}

/// Session-level signal-to-noise ratio of the planted signal, per modality.
///
/// A modality's strength is shared in quadrature by all of its catalog
/// features, so a model that sees every stream of a modality gets the full
/// ratio regardless of sequence length or stream count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalStrength {
    pub text: f64,
    pub audio: f64,
    pub video: f64,
}

impl Default for SignalStrength {
    fn default() -> Self {
        Self {
            text: 8.0,
            audio: 4.0,
            video: 4.0,
        }
    }
}

impl SignalStrength {
    pub fn get(&self, modality: Modality) -> f64 {
        match modality {
            Modality::Text => self.text,
            Modality::Audio => self.audio,
            Modality::Video => self.video,
        }
    }

    pub fn set(&mut self, modality: Modality, value: f64) {
        match modality {
            Modality::Text => self.text = value,
            Modality::Audio => self.audio = value,
            Modality::Video => self.video = value,
        }
    }
}

/// Where and how strongly the label is embedded into one feature stream.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSignal {
    /// Unit-norm direction `u_f`.
    pub direction: Vec<f64>,
    pub start: usize,
    pub len: usize,
    /// Per-row coefficient at the maximum score; scales linearly with the label.
    pub amplitude: f64,
}

impl PlantedSignal {
    fn plan(seed: u64, spec: &FeatureSpec, strength: f64, streams: usize) -> Self {
        let mut rng = SeededRng::new(mix_label(seed, &spec.name));
        let mut direction: Vec<f64> = (0..spec.dim).map(|_| rng.normal()).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        direction.iter_mut().for_each(|v| *v /= norm);
        let len =
            ((spec.timesteps as f64 * WINDOW_FRACTION).ceil() as usize).clamp(1, spec.timesteps);
        let start = rng.below((spec.timesteps - len + 1) as u64) as usize;
        let amplitude = strength / ((streams.max(1) * len) as f64).sqrt();
        Self {
            direction,
            start,
            len,
            amplitude,
        }
    }

    /// Signal coefficient for a label.
    pub fn coefficient(&self, phq8: u8) -> f64 {
        self.amplitude * f64::from(phq8) / f64::from(PHQ8_MAX)
    }
}

/// Draws sessions as standard normal noise plus a fixed planted signal.
#[derive(Clone, Debug)]
pub struct Generator {
    catalog: Catalog,
    plans: Vec<PlantedSignal>,
    selected: Vec<usize>,
}

impl Generator {
    /// `catalog` holds the (already scaled) shapes; directions and windows
    /// derive from `plan_seed`.
    pub fn new(plan_seed: u64, catalog: Catalog, strength: SignalStrength) -> Self {
        let plans = catalog
            .specs()
            .iter()
            .map(|s| {
                let streams = catalog.modality_count(s.modality);
                PlantedSignal::plan(plan_seed, s, strength.get(s.modality), streams)
            })
            .collect();
        let selected = (0..catalog.specs().len()).collect();
        Self {
            catalog,
            plans,
            selected,
        }
    }

    /// Restricts generation to the named features.
    pub fn with_features<S: AsRef<str>>(mut self, names: &[S]) -> Result<Self> {
        let mut selected = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            self.catalog.lookup(n)?;
            let idx = self
                .catalog
                .specs()
                .iter()
                .position(|s| s.name == n)
                .unwrap();
            if !selected.contains(&idx) {
                selected.push(idx);
            }
        }
        selected.sort_unstable();
        self.selected = selected;
        Ok(self)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.selected
            .iter()
            .map(|&i| self.catalog.specs()[i].name.as_str())
            .collect()
    }

    pub fn plan(&self, name: &str) -> Option<&PlantedSignal> {
        let idx = self.catalog.specs().iter().position(|s| s.name == name)?;
        Some(&self.plans[idx])
    }

    /// Feature matrices for one session. Noise for each feature comes from
    /// its own stream of `rng_seed`, so subsets agree with full generation.
    pub fn generate_features(
        &self,
        rng_seed: u64,
        phq8: i64,
    ) -> Result<BTreeMap<String, Tensor<f64>>> {
        let label = check_label(phq8)?;
        let mut out = BTreeMap::new();
        for &i in &self.selected {
            let spec = &self.catalog.specs()[i];
            let plan = &self.plans[i];
            let mut rng = SeededRng::new(mix_label(rng_seed, &spec.name));
            let mut data: Vec<f64> = (0..spec.timesteps * spec.dim)
                .map(|_| rng.normal())
                .collect();
            let k = plan.coefficient(label);
            if k != 0.0 {
                for row in data
                    .chunks_exact_mut(spec.dim)
                    .skip(plan.start)
                    .take(plan.len)
                {
                    for (x, u) in row.iter_mut().zip(&plan.direction) {
                        *x += k * u;
                    }
                }
            }
            out.insert(spec.name.clone(), Tensor::new(spec.shape().to_vec(), data)?);
        }
        Ok(out)
    }

    pub fn generate_session(
        &self,
        session_id: impl Into<String>,
        partition: Partition,
        rng_seed: u64,
        phq8: i64,
    ) -> Result<SessionRecord> {
        let features = self.generate_features(rng_seed, phq8)?;
        Ok(SessionRecord {
            session_id: session_id.into(),
            partition,
            phq8: check_label(phq8)?,
            features,
        })
    }
}

fn check_label(phq8: i64) -> Result<u8> {
    if !(0..=i64::from(PHQ8_MAX)).contains(&phq8) {
        return Err(Error::domain(
            "generate_session",
            format!("phq8 target {phq8} outside [0, {PHQ8_MAX}]"),
        ));
    }
    Ok(phq8 as u8)
}

/// Zero-pads or keeps the head of `seq: [t, d]` to exactly `target` rows.
pub fn pad_or_truncate<T: Scalar>(seq: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    if seq.rank() != 2 || target == 0 {
        return Err(Error::dim("pad_or_truncate", seq.shape(), &[target]));
    }
    let d = seq.shape()[1];
    let keep = seq.shape()[0].min(target);
    let mut data = seq.data()[..keep * d].to_vec();
    data.resize(target * d, T::zero());
    Tensor::new(vec![target, d], data)
}
