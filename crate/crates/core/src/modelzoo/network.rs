use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::layers::{
    Activation, Attention, Blstm, Dense, FeedForward, Frame, ParamId, ParamStore, StackedBlstm,
    StreamFusion, WindowPool,
};
use crate::modelzoo::config::{normalize_scaling, ModelConfig, ModelKind, FUSION_MODALITIES};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::synthdata::{FeatureSpec, Modality};

/// Depth of the recurrent stack over a single audio or text stream.
const STACK_DEPTH: usize = 2;

/// Turns one or more input streams into a sequence `[L, 2H]`.
#[derive(Clone, Debug)]
pub(crate) enum Encoder {
    /// One stream through a (stacked) BLSTM.
    Recurrent { input: usize, stack: StackedBlstm },
    /// Several streams: a BLSTM each, window pooling to a common length,
    /// per-step attention across streams, then a further BLSTM.
    Fused {
        inputs: Vec<usize>,
        streams: Vec<Blstm>,
        pools: Vec<Option<WindowPool>>,
        fusion: StreamFusion,
        post: Blstm,
    },
}

impl Encoder {
    fn build<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        members: &[(usize, &FeatureSpec)],
        cfg: &ModelConfig,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let h = cfg.hidden_size;
        if let [(idx, spec)] = members {
            let depth = if spec.modality == Modality::Video {
                1
            } else {
                STACK_DEPTH
            };
            let stack = StackedBlstm::new(
                store,
                &format!("{name}.{}", spec.name),
                spec.dim,
                h,
                depth,
                rng,
            )?;
            return Ok(Encoder::Recurrent { input: *idx, stack });
        }
        let len = members
            .iter()
            .map(|(_, s)| s.timesteps)
            .min()
            .ok_or_else(|| Error::Config(format!("{name}: encoder needs a stream")))?
            .min(cfg.fused_len);
        let mut streams = Vec::with_capacity(members.len());
        let mut pools = Vec::with_capacity(members.len());
        for (_, spec) in members {
            streams.push(Blstm::new(
                store,
                &format!("{name}.{}", spec.name),
                spec.dim,
                h,
                rng,
            )?);
            pools.push(if spec.timesteps > len {
                let pname = format!("{name}.pool.{}", spec.name);
                Some(WindowPool::new(
                    store,
                    &pname,
                    2 * h,
                    len,
                    cfg.attention_size,
                    rng,
                )?)
            } else {
                None
            });
        }
        let fusion = StreamFusion::new(
            store,
            &format!("{name}.fusion"),
            2 * h,
            cfg.attention_size,
            rng,
        )?;
        let post = Blstm::new(store, &format!("{name}.post"), 2 * h, h, rng)?;
        Ok(Encoder::Fused {
            inputs: members.iter().map(|(i, _)| *i).collect(),
            streams,
            pools,
            fusion,
            post,
        })
    }

    fn forward<T: Scalar>(&self, frame: &mut Frame<T>, inputs: &[Var]) -> Result<Var> {
        match self {
            Encoder::Recurrent { input, stack } => stack.forward(frame, inputs[*input]),
            Encoder::Fused {
                inputs: idx,
                streams,
                pools,
                fusion,
                post,
            } => {
                let mut seqs = Vec::with_capacity(streams.len());
                for ((&i, blstm), pool) in idx.iter().zip(streams).zip(pools) {
                    let h = blstm.forward(frame, inputs[i])?;
                    seqs.push(match pool {
                        Some(p) => p.forward(frame, h)?,
                        None => h,
                    });
                }
                let fused = fusion.forward(frame, &seqs)?;
                post.forward(frame, fused)
            }
        }
    }
}

/// Encoder followed by attention pooling and a dense projection.
#[derive(Clone, Debug)]
pub(crate) struct Branch {
    encoder: Encoder,
    attention: Attention,
    dense: Option<Dense>,
}

impl Branch {
    fn build<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        members: &[(usize, &FeatureSpec)],
        cfg: &ModelConfig,
        project: bool,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let encoder = Encoder::build(store, name, members, cfg, rng)?;
        let d = 2 * cfg.hidden_size;
        let attention = Attention::new(store, &format!("{name}.attn"), d, cfg.attention_size, rng)?;
        let dense = if project {
            let dname = format!("{name}.dense");
            Some(Dense::new(
                store,
                &dname,
                d,
                cfg.fusion_ffn_width,
                Activation::Relu,
                rng,
            )?)
        } else {
            None
        };
        Ok(Self {
            encoder,
            attention,
            dense,
        })
    }

    fn forward<T: Scalar>(&self, frame: &mut Frame<T>, inputs: &[Var]) -> Result<Var> {
        let seq = self.encoder.forward(frame, inputs)?;
        let ctx = self.attention.forward(frame, seq)?.context;
        match &self.dense {
            Some(d) => d.forward(frame, ctx),
            None => Ok(ctx),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Network {
    Single {
        encoder: Encoder,
        /// `None` pools with a max over time.
        attention: Option<Attention>,
        head: FeedForward,
    },
    VideoFused {
        encoder: Encoder,
        head: FeedForward,
    },
    VideoText {
        video: Branch,
        text: Branch,
        joint: StackedBlstm,
        attention: Attention,
        head: FeedForward,
    },
    AudioText {
        audio: Branch,
        text: Branch,
        route1_attention: Attention,
        route1_dense: Dense,
        route2: StackedBlstm,
        route2_attention: Attention,
        route2_dense: Dense,
        head: Dense,
    },
    AllFusion {
        branches: Vec<Branch>,
        attention: Attention,
        scaling: ParamId,
        head: Dense,
    },
}

/// Result of one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    /// Prediction, shape `[1]`.
    pub output: Var,
    /// Modality-level attention weights (all-feature fusion only).
    pub modality_weights: Option<Var>,
    pub scaling: Option<Var>,
}

fn members(specs: &[FeatureSpec], modality: Modality) -> Vec<(usize, &FeatureSpec)> {
    specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.modality == modality)
        .collect()
}

impl Network {
    pub(crate) fn build<T: Scalar>(
        store: &mut ParamStore<T>,
        cfg: &ModelConfig,
        specs: &[FeatureSpec],
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let d = 2 * cfg.hidden_size;
        let f = cfg.fusion_ffn_width;
        let a = cfg.attention_size;
        Ok(match cfg.kind {
            ModelKind::SingleFeature => {
                let spec = &specs[0];
                let encoder = Encoder::build(store, "encoder", &[(0, spec)], cfg, rng)?;
                let attention = if spec.modality == Modality::Video {
                    None
                } else {
                    Some(Attention::new(store, "attention", d, a, rng)?)
                };
                let head = FeedForward::new(store, "ffn", d, &cfg.ffn_widths, rng)?;
                Network::Single {
                    encoder,
                    attention,
                    head,
                }
            }
            ModelKind::VideoLldFused | ModelKind::VideoBovwFused => {
                let m = members(specs, Modality::Video);
                let encoder = Encoder::build(store, "video", &m, cfg, rng)?;
                let head = FeedForward::new(store, "head", d, &[f, 1], rng)?;
                Network::VideoFused { encoder, head }
            }
            ModelKind::VideoTextFused => {
                let video = Branch::build(
                    store,
                    "video",
                    &members(specs, Modality::Video),
                    cfg,
                    false,
                    rng,
                )?;
                let text = Branch::build(
                    store,
                    "text",
                    &members(specs, Modality::Text),
                    cfg,
                    false,
                    rng,
                )?;
                let joint =
                    StackedBlstm::new(store, "joint", d, cfg.hidden_size, STACK_DEPTH, rng)?;
                let attention = Attention::new(store, "joint.attn", d, a, rng)?;
                let head = FeedForward::new(store, "head", d, &[f, 1], rng)?;
                Network::VideoText {
                    video,
                    text,
                    joint,
                    attention,
                    head,
                }
            }
            ModelKind::AudioTextFused => {
                let audio = Branch::build(
                    store,
                    "audio",
                    &members(specs, Modality::Audio),
                    cfg,
                    false,
                    rng,
                )?;
                let text = Branch::build(
                    store,
                    "text",
                    &members(specs, Modality::Text),
                    cfg,
                    false,
                    rng,
                )?;
                let route1_attention = Attention::new(store, "route1.attn", d, a, rng)?;
                let route1_dense = Dense::new(store, "route1.dense", d, f, Activation::Relu, rng)?;
                let route2 =
                    StackedBlstm::new(store, "route2", d, cfg.hidden_size, STACK_DEPTH, rng)?;
                let route2_attention = Attention::new(store, "route2.attn", d, a, rng)?;
                let route2_dense = Dense::new(store, "route2.dense", d, f, Activation::Relu, rng)?;
                let head = Dense::new(store, "head", f, 1, Activation::Identity, rng)?;
                Network::AudioText {
                    audio,
                    text,
                    route1_attention,
                    route1_dense,
                    route2,
                    route2_attention,
                    route2_dense,
                    head,
                }
            }
            ModelKind::AllFeatureFusion => {
                let mut branches = Vec::with_capacity(FUSION_MODALITIES.len());
                for m in FUSION_MODALITIES {
                    branches.push(Branch::build(
                        store,
                        m.as_str(),
                        &members(specs, m),
                        cfg,
                        true,
                        rng,
                    )?);
                }
                let attention = Attention::new(store, "modality.attn", f, a, rng)?;
                let init = normalize_scaling(cfg.scaling_init.as_deref().unwrap_or(&[1.0; 3]))?;
                let scaling = store.add(
                    "modality.scaling",
                    crate::autodiff::Tensor::from_f64(vec![3], &init)?,
                )?;
                store.get_mut(scaling).trainable = !cfg.freeze_scaling;
                let head = Dense::new(store, "head", f, 1, Activation::Identity, rng)?;
                Network::AllFusion {
                    branches,
                    attention,
                    scaling,
                    head,
                }
            }
        })
    }

    /// Bias of the final regressor unit.
    pub(crate) fn output_bias(&self) -> ParamId {
        let last = |ffn: &FeedForward| ffn.layers.last().expect("non-empty feedforward").b;
        match self {
            Network::Single { head, .. }
            | Network::VideoFused { head, .. }
            | Network::VideoText { head, .. } => last(head),
            Network::AudioText { head, .. } | Network::AllFusion { head, .. } => head.b,
        }
    }

    pub(crate) fn forward<T: Scalar>(
        &self,
        frame: &mut Frame<T>,
        inputs: &[Var],
    ) -> Result<Forward> {
        let plain = |output| Forward {
            output,
            modality_weights: None,
            scaling: None,
        };
        match self {
            Network::Single {
                encoder,
                attention,
                head,
            } => {
                let seq = encoder.forward(frame, inputs)?;
                let pooled = match attention {
                    Some(att) => att.forward(frame, seq)?.context,
                    None => frame.tape.max_over_time(seq)?,
                };
                head.forward(frame, pooled).map(plain)
            }
            Network::VideoFused { encoder, head } => {
                let seq = encoder.forward(frame, inputs)?;
                let pooled = frame.tape.max_over_time(seq)?;
                head.forward(frame, pooled).map(plain)
            }
            Network::VideoText {
                video,
                text,
                joint,
                attention,
                head,
            } => {
                let v = video.forward(frame, inputs)?;
                let t = text.forward(frame, inputs)?;
                let pair = frame.tape.stack(&[v, t])?;
                let seq = joint.forward(frame, pair)?;
                let ctx = attention.forward(frame, seq)?.context;
                head.forward(frame, ctx).map(plain)
            }
            Network::AudioText {
                audio,
                text,
                route1_attention,
                route1_dense,
                route2,
                route2_attention,
                route2_dense,
                head,
            } => {
                let a = audio.forward(frame, inputs)?;
                let t = text.forward(frame, inputs)?;
                let pair = frame.tape.stack(&[a, t])?;
                let r1 = route1_attention.forward(frame, pair)?.context;
                let r1 = route1_dense.forward(frame, r1)?;
                let seq = route2.forward(frame, pair)?;
                let r2 = route2_attention.forward(frame, seq)?.context;
                let r2 = route2_dense.forward(frame, r2)?;
                let merged = frame.tape.mul(r1, r2)?;
                head.forward(frame, merged).map(plain)
            }
            Network::AllFusion {
                branches,
                attention,
                scaling,
                head,
            } => {
                let z = branches
                    .iter()
                    .map(|b| b.forward(frame, inputs))
                    .collect::<Result<Vec<_>>>()?;
                let z = frame.tape.stack(&z)?;
                let w = attention.forward(frame, z)?.weights;
                let s = frame.p(*scaling);
                let ws = frame.tape.mul(w, s)?;
                let zt = frame.tape.transpose(z)?;
                let fused = frame.tape.matmul(zt, ws)?;
                let output = head.forward(frame, fused)?;
                Ok(Forward {
                    output,
                    modality_weights: Some(w),
                    scaling: Some(s),
                })
            }
        }
    }
}
