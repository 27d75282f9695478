use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::Frame;
use crate::modelzoo::config::{ModelKind, FUSION_MODALITIES};
use crate::modelzoo::model::Model;
use crate::scalar::Scalar;
use crate::synthdata::SessionRecord;

/// Per-modality contribution of an all-feature fusion model.
///
/// `ratios` averages, over sessions, the modality attention weights
/// multiplied by the magnitude of the scaling vector and renormalized; with
/// uniform scaling they equal the averaged attention weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub modality_names: Vec<String>,
    pub ratios: Vec<f64>,
    /// Averaged raw attention weights.
    pub attention: Vec<f64>,
    /// Normalized scaling vector at report time.
    pub scaling: Vec<f64>,
    pub sessions: usize,
}

impl AttentionReport {
    pub fn argmax(&self) -> usize {
        self.ratios
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &r)| {
                if r > best.1 {
                    (i, r)
                } else {
                    best
                }
            })
            .0
    }

    pub fn ratio(&self, name: &str) -> Option<f64> {
        let i = self.modality_names.iter().position(|n| n == name)?;
        Some(self.ratios[i])
    }
}

impl fmt::Display for AttentionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sessions={}", self.sessions)?;
        for (n, r) in self.modality_names.iter().zip(&self.ratios) {
            writeln!(f, "{n}={r}")?;
        }
        for (n, a) in self.modality_names.iter().zip(&self.attention) {
            writeln!(f, "attention.{n}={a}")?;
        }
        for (n, s) in self.modality_names.iter().zip(&self.scaling) {
            writeln!(f, "scaling.{n}={s}")?;
        }
        Ok(())
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

/// Averages the modality attention of `model` over `sessions`.
pub fn attention_ratios<T: Scalar>(
    model: &Model<T>,
    sessions: &[&SessionRecord],
) -> Result<AttentionReport> {
    if model.kind() != ModelKind::AllFeatureFusion {
        return Err(Error::Contract(format!(
            "attention report needs an all_fusion model, got {}",
            model.kind()
        )));
    }
    if sessions.is_empty() {
        return Err(Error::Contract(
            "attention report needs at least one session".into(),
        ));
    }
    let k = FUSION_MODALITIES.len();
    let (mut ratios, mut attention) = (vec![0.0; k], vec![0.0; k]);
    let mut scaling = Vec::new();
    for s in sessions {
        let mut frame = Frame::bind(model.params());
        let inputs = model.bind_inputs(&mut frame, s)?;
        let out = model.forward(&mut frame, &inputs)?;
        let (w, sc) = match (out.modality_weights, out.scaling) {
            (Some(w), Some(sc)) => (frame.value(w).to_f64_vec(), frame.value(sc).to_f64_vec()),
            _ => {
                return Err(Error::Contract(
                    "model exposes no modality attention".into(),
                ))
            }
        };
        let weighted: Vec<f64> = w.iter().zip(&sc).map(|(a, b)| a * b.abs()).collect();
        let total: f64 = weighted.iter().sum();
        let eff = if total > 0.0 {
            normalized(&weighted)
        } else {
            w.clone()
        };
        for i in 0..k {
            ratios[i] += eff[i];
            attention[i] += w[i];
        }
        scaling = sc;
    }
    let n = sessions.len() as f64;
    let scale_abs: Vec<f64> = scaling.iter().map(|v| v.abs()).collect();
    let scale_total: f64 = scale_abs.iter().sum();
    Ok(AttentionReport {
        modality_names: FUSION_MODALITIES.iter().map(|m| m.to_string()).collect(),
        ratios: normalized(&ratios.iter().map(|r| r / n).collect::<Vec<_>>()),
        attention: attention.iter().map(|a| a / n).collect(),
        scaling: if scale_total > 0.0 {
            normalized(&scale_abs)
        } else {
            scale_abs
        },
        sessions: sessions.len(),
    })
}
