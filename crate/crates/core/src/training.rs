//! Mean-squared-error training with Adam, global-norm clipping and
//! best-dev-epoch retention.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::{Frame, ParamStore};
use crate::metrics::MetricsReport;
use crate::modelzoo::Model;
use crate::rng::{mix, SeededRng};
use crate::scalar::Scalar;
use crate::synthdata::{Corpus, Partition, SessionRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub freeze_scaling: bool,
    pub scale_divisor: usize,
    /// Global gradient-norm ceiling; no clipping when `None`.
    pub clip_norm: Option<f64>,
    /// Restore the parameters of the best dev-RMSE epoch after training.
    pub keep_best: bool,
    /// Set the regressor's output bias to the mean train label before the
    /// first step.
    pub init_output_bias: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 10,
            learning_rate: 1e-3,
            seed: 0,
            freeze_scaling: false,
            scale_divisor: 100,
            clip_norm: Some(5.0),
            keep_best: true,
            init_output_bias: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.clip_norm.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::Config("clip_norm must be > 0".into()));
        }
        if self.scale_divisor == 0 {
            return Err(Error::Config("scale_divisor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean squared error between `pred` and `truth` of equal shape.
pub fn mse_loss<T: Scalar>(tape: &mut Tape<T>, pred: Var, truth: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(truth) {
        return Err(Error::Contract(format!(
            "mse_loss shapes differ: {:?} vs {:?}",
            tape.shape(pred),
            tape.shape(truth)
        )));
    }
    let diff = tape.sub(pred, truth)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.mean(sq))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
    pub adam: Adam,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            adam: Adam::default(),
        }
    }
}

/// One bias-corrected Adam update. `grads[i]` belongs to the `i`-th store
/// parameter; `None` and frozen parameters are left untouched.
pub fn adam_step<T: Scalar>(
    store: &mut ParamStore<T>,
    grads: &[Option<Tensor<T>>],
    state: &mut OptimizerState<T>,
    lr: f64,
) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} params, {} grads, {} moments",
            store.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in store.iter().zip(grads) {
        if let Some(g) = g {
            if g.shape() != p.value.shape() {
                return Err(Error::dim("adam_step", p.value.shape(), g.shape()));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(p.name.clone()));
            }
        }
    }
    state.step += 1;
    let Adam { beta1, beta2, eps } = state.adam;
    let t = state.step as i32;
    let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let (a1, a2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
    let step = T::of(lr / c1);
    let (inv_c2, eps) = (T::of(1.0 / c2), T::of(eps));
    for (i, (p, g)) in store.iter_mut().zip(grads).enumerate() {
        let Some(g) = g else { continue };
        if !p.trainable {
            continue;
        }
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((x, &gi), mi), vi) in p.value.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mi = b1 * *mi + a1 * gi;
            *vi = b2 * *vi + a2 * gi * gi;
            *x -= step * *mi / ((*vi * inv_c2).sqrt() + eps);
        }
    }
    Ok(())
}

/// Rescales all gradients so their joint norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Option<Tensor<T>>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flatten()
        .map(|g| g.norm_sq().to_f64_lossy())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = T::of(max_norm / norm);
        for g in grads.iter_mut().flatten() {
            g.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Root of the mean squared error of the batches seen during the epoch.
    pub train_rmse: f64,
    pub dev: MetricsReport,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x}"))
}

impl History {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.epochs.get(e - 1))
    }

    /// Tab-separated table with a header row; holds no timing so reruns are
    /// byte-identical.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "epoch\ttrain_rmse\tdev_rmse\tdev_mae\tdev_ccc\tdev_pcc\tdev_scc\tdev_r2\n",
        );
        for e in &self.epochs {
            let d = &e.dev;
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.epoch,
                e.train_rmse,
                d.rmse,
                d.mae,
                cell(d.ccc),
                cell(d.pcc),
                cell(d.scc),
                cell(d.r2)
            )
            .unwrap();
        }
        s
    }

    pub fn timings_tsv(&self) -> String {
        let mut s = String::from("epoch\tseconds\n");
        for e in &self.epochs {
            writeln!(s, "{}\t{:.3}", e.epoch, e.seconds).unwrap();
        }
        s
    }
}

/// Raw predictions for `sessions`, in order.
pub fn predictions<T: Scalar>(model: &Model<T>, sessions: &[&SessionRecord]) -> Result<Vec<f64>> {
    sessions
        .iter()
        .map(|s| model.predict(s).map(Scalar::to_f64_lossy))
        .collect()
}

pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    corpus: &Corpus,
    partition: Partition,
) -> Result<MetricsReport> {
    let sessions = corpus.partition(partition);
    if sessions.is_empty() {
        return Err(Error::Contract(format!("partition {partition} is empty")));
    }
    let pred = predictions(model, &sessions)?;
    let truth: Vec<f64> = sessions.iter().map(|s| f64::from(s.phq8)).collect();
    MetricsReport::compute(&pred, &truth)
}

/// Loss and parameter gradients of one batch.
pub fn batch_gradients<T: Scalar>(
    model: &Model<T>,
    batch: &[&SessionRecord],
) -> Result<(f64, Vec<Option<Tensor<T>>>)> {
    let mut frame = Frame::bind(model.params());
    let mut outputs = Vec::with_capacity(batch.len());
    for s in batch {
        let inputs = model.bind_inputs(&mut frame, s)?;
        outputs.push(model.forward(&mut frame, &inputs)?.output);
    }
    let pred = frame.tape.stack(&outputs)?;
    let truth = Tensor::new(
        vec![batch.len(), 1],
        batch.iter().map(|s| T::of(f64::from(s.phq8))).collect(),
    )?;
    let truth = frame.tape.constant(truth);
    let loss = mse_loss(&mut frame.tape, pred, truth)?;
    let value = frame.value(loss).data()[0].to_f64_lossy();
    let mut grads = frame.tape.backward(loss)?;
    Ok((value, frame.param_grads(&mut grads)))
}

/// Trains `model` in place. One optimizer step per batch of shuffled train
/// sessions; dev metrics after every epoch.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    let train_set = corpus.partition(Partition::Train);
    let dev_set = corpus.partition(Partition::Dev);
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Contract(
            "training needs non-empty train and dev partitions".into(),
        ));
    }
    if cfg.freeze_scaling {
        if let Some(id) = model.params().id_of("modality.scaling") {
            model.params_mut().get_mut(id).trainable = false;
        }
    }
    if cfg.init_output_bias {
        let mean =
            train_set.iter().map(|s| f64::from(s.phq8)).sum::<f64>() / train_set.len() as f64;
        let id = model.output_bias();
        model.params_mut().get_mut(id).value.data_mut()[0] = T::of(mean);
    }
    let dev_truth: Vec<f64> = dev_set.iter().map(|s| f64::from(s.phq8)).collect();
    let mut state = OptimizerState::new(model.params());
    let mut history = History::default();
    let mut best: Option<(f64, ParamStore<T>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        SeededRng::new(mix(cfg.seed, epoch as u64)).shuffle(&mut order);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SessionRecord> = chunk.iter().map(|&i| train_set[i]).collect();
            let (loss, mut grads) = batch_gradients(model, &batch)?;
            sq_sum += loss * batch.len() as f64;
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut grads, c);
            }
            adam_step(model.params_mut(), &grads, &mut state, cfg.learning_rate)?;
        }
        let dev_pred = predictions(model, &dev_set)?;
        let dev = MetricsReport::compute(&dev_pred, &dev_truth)?;
        if best.as_ref().is_none_or(|(r, _)| dev.rmse < *r) {
            best = Some((dev.rmse, model.params().clone()));
            history.best_epoch = Some(epoch);
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_rmse: (sq_sum / train_set.len() as f64).sqrt(),
            dev,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if cfg.keep_best {
        if let Some((_, params)) = best {
            *model.params_mut() = params;
        }
    } else {
        history.best_epoch = Some(cfg.epochs);
    }
    Ok(history)
}
