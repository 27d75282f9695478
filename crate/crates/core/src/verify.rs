//! Finite-difference verification of every primitive, layer and model
//! kind at tiny shapes.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::autodiff::{relative_error, BackwardFault, GradCheck, Tape, Tensor, Var, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::layers::{
    Activation, Attention, Blstm, Dense, FeedForward, Frame, LstmCell, ParamStore, StackedBlstm,
    StreamFusion, WindowPool,
};
use crate::modelzoo::{zoo, Model, ModelConfig};
use crate::rng::SeededRng;
use crate::synthdata::{Catalog, FeatureSpec, Generator, Partition, SessionRecord, SignalStrength};
use crate::training::mse_loss;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

impl ComponentCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// The catalog with every stream shrunk to a few steps and dimensions.
/// Video streams are longer than the fused length so window pooling is
/// exercised; the two audio functionals differ in length.
pub fn tiny_catalog() -> Catalog {
    let specs = Catalog::full()
        .specs()
        .iter()
        .map(|s| {
            let timesteps = match s.name.as_str() {
                "text_use" => 2,
                "egemaps_funct" => 4,
                n if n.ends_with("_lld") || n == "bovw" => 5,
                _ => 3,
            };
            FeatureSpec {
                dim: s.dim.min(3),
                timesteps,
                ..s.clone()
            }
        })
        .collect();
    Catalog::from_specs(specs)
}

/// Shrinks a zoo configuration to gradient-check size.
pub fn tiny_config(cfg: &ModelConfig) -> ModelConfig {
    ModelConfig {
        hidden_size: 2,
        ffn_widths: vec![3, 1],
        fusion_ffn_width: 3,
        fused_len: 3,
        ..cfg.clone()
    }
}

/// Smooth positive loss weights, so no output direction cancels.
fn loss_weights(n: usize) -> Tensor<f64> {
    Tensor::new(vec![n], (0..n).map(|i| 0.5 + 0.13 * i as f64).collect()).unwrap()
}

fn weighted_sum(tape: &mut Tape<f64>, x: Var) -> Result<Var> {
    let n = tape.value(x).len();
    let flat = tape.reshape(x, &[n])?;
    let w = tape.constant(loss_weights(n));
    let p = tape.mul(flat, w)?;
    Ok(tape.sum(p))
}

/// Central-difference check of a store-parameterized scalar function.
pub fn check_store(
    store: &ParamStore<f64>,
    fault: BackwardFault,
    max_entries: usize,
    seed: u64,
    f: impl Fn(&mut Frame<f64>) -> Result<Var>,
) -> Result<(f64, usize)> {
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut frame = Frame::bind(s);
        let out = f(&mut frame)?;
        let v = frame.value(out).data()[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain("grad_check", "function value is not finite"))
        }
    };
    let mut frame = Frame::bind_with_fault(store, fault);
    let out = f(&mut frame)?;
    if frame.value(out).len() != 1 {
        return Err(Error::Contract(
            "gradient check needs a scalar function".into(),
        ));
    }
    let mut grads = frame.tape.backward(out)?;
    let analytic = frame.param_grads(&mut grads);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = store.clone();
    let (mut worst, mut checked) = (0.0f64, 0usize);
    let ids: Vec<_> = store.names().map(|n| store.id_of(n).unwrap()).collect();
    for (i, id) in ids.into_iter().enumerate() {
        let len = store.get(id).value.len();
        let entries: Vec<usize> = if len > max_entries {
            (0..max_entries)
                .map(|_| (rng.next_u64() % len as u64) as usize)
                .collect()
        } else {
            (0..len).collect()
        };
        for j in entries {
            let orig = store.get(id).value.data()[j];
            probe.get_mut(id).value.data_mut()[j] = orig + DEFAULT_EPS;
            let plus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[j] = orig - DEFAULT_EPS;
            let minus = eval(&probe)?;
            probe.get_mut(id).value.data_mut()[j] = orig;
            let fd = (plus - minus) / (2.0 * DEFAULT_EPS);
            let ad = analytic[i].as_ref().map_or(0.0, |g| g.data()[j]);
            worst = worst.max(relative_error(ad, fd));
            checked += 1;
        }
    }
    Ok((worst, checked))
}

fn randn(rng: &mut SeededRng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.normal()).collect()).unwrap()
}

type PrimitiveFn = fn(&mut Tape<f64>, &[Var]) -> Result<Var>;

fn primitive_cases() -> Vec<(&'static str, Vec<Vec<usize>>, PrimitiveFn)> {
    vec![
        ("matmul", vec![vec![3, 4], vec![4, 2]], |t, v| {
            t.matmul(v[0], v[1])
        }),
        ("matmul.vector", vec![vec![3, 4], vec![4]], |t, v| {
            t.matmul(v[0], v[1])
        }),
        ("matmul_bt", vec![vec![3, 4], vec![2, 4]], |t, v| {
            t.matmul_bt(v[0], v[1])
        }),
        ("elementwise.add", vec![vec![2, 3], vec![2, 3]], |t, v| {
            t.add(v[0], v[1])
        }),
        (
            "elementwise.add_broadcast",
            vec![vec![2, 3], vec![3]],
            |t, v| t.add(v[0], v[1]),
        ),
        ("elementwise.sub", vec![vec![2, 3], vec![3]], |t, v| {
            t.sub(v[0], v[1])
        }),
        ("elementwise.mul", vec![vec![2, 3], vec![2, 3]], |t, v| {
            t.mul(v[0], v[1])
        }),
        (
            "elementwise.mul_broadcast",
            vec![vec![3], vec![2, 3]],
            |t, v| t.mul(v[0], v[1]),
        ),
        ("elementwise.scale", vec![vec![2, 3]], |t, v| {
            Ok(t.scale(v[0], -1.7))
        }),
        (
            "elementwise.tanh",
            vec![vec![2, 3]],
            |t, v| Ok(t.tanh(v[0])),
        ),
        ("elementwise.sigmoid", vec![vec![2, 3]], |t, v| {
            Ok(t.sigmoid(v[0]))
        }),
        (
            "elementwise.relu",
            vec![vec![2, 3]],
            |t, v| Ok(t.relu(v[0])),
        ),
        ("softmax", vec![vec![2, 4]], |t, v| t.softmax(v[0])),
        ("concat.rows", vec![vec![2, 3], vec![1, 3]], |t, v| {
            t.concat(&[v[0], v[1]], 0)
        }),
        ("concat.columns", vec![vec![2, 3], vec![2, 1]], |t, v| {
            t.concat(&[v[0], v[1]], 1)
        }),
        ("max_over_time", vec![vec![4, 3]], |t, v| {
            t.max_over_time(v[0])
        }),
        ("transpose", vec![vec![2, 3]], |t, v| t.transpose(v[0])),
        ("slice_rows", vec![vec![4, 2]], |t, v| {
            t.slice_rows(v[0], 1, 2)
        }),
        ("slice_last", vec![vec![2, 5]], |t, v| {
            t.slice_last(v[0], 1, 3)
        }),
        ("row", vec![vec![3, 2]], |t, v| t.row(v[0], 2)),
        ("stack", vec![vec![3], vec![3]], |t, v| {
            t.stack(&[v[0], v[1]])
        }),
        ("sum", vec![vec![2, 3]], |t, v| Ok(t.sum(v[0]))),
        ("mean", vec![vec![2, 3]], |t, v| Ok(t.mean(v[0]))),
        ("reshape", vec![vec![2, 3]], |t, v| t.reshape(v[0], &[3, 2])),
    ]
}

type LayerBuild = fn(
    &mut ParamStore<f64>,
    &mut SeededRng,
) -> Result<Box<dyn Fn(&mut Frame<f64>, Var) -> Result<Var>>>;

fn layer_cases() -> Vec<(&'static str, Vec<usize>, LayerBuild)> {
    vec![
        ("layer.dense", vec![4], |s, r| {
            let l = Dense::new(s, "d", 4, 3, Activation::Relu, r)?;
            Ok(Box::new(move |f, x| l.forward(f, x)))
        }),
        ("layer.feedforward", vec![2, 4], |s, r| {
            let l = FeedForward::new(s, "ff", 4, &[5, 3, 1], r)?;
            Ok(Box::new(move |f, x| l.forward(f, x)))
        }),
        ("layer.lstm_cell", vec![4, 3], |s, r| {
            let l = LstmCell::new(s, "c", 3, 2, r)?;
            Ok(Box::new(move |f, x| l.run(f, x, false)))
        }),
        ("layer.blstm", vec![4, 3], |s, r| {
            let l = Blstm::new(s, "b", 3, 2, r)?;
            Ok(Box::new(move |f, x| l.forward(f, x)))
        }),
        ("layer.stacked_blstm", vec![3, 3], |s, r| {
            let l = StackedBlstm::new(s, "sb", 3, 2, 2, r)?;
            Ok(Box::new(move |f, x| l.forward(f, x)))
        }),
        ("layer.attention", vec![5, 4], |s, r| {
            let l = Attention::new(s, "a", 4, Some(3), r)?;
            Ok(Box::new(move |f, x| Ok(l.forward(f, x)?.context)))
        }),
        ("layer.window_pool", vec![7, 3], |s, r| {
            let l = WindowPool::new(s, "wp", 3, 3, None, r)?;
            Ok(Box::new(move |f, x| l.forward(f, x)))
        }),
        ("layer.stream_fusion", vec![3, 4], |s, r| {
            let l = StreamFusion::new(s, "sf", 2, None, r)?;
            Ok(Box::new(move |f, x| {
                let a = f.tape.slice_last(x, 0, 2)?;
                let b = f.tape.slice_last(x, 2, 2)?;
                l.forward(f, &[a, b])
            }))
        }),
    ]
}

/// A session of random matrices shaped like `catalog`.
pub fn random_session(catalog: &Catalog, seed: u64, phq8: i64) -> Result<SessionRecord> {
    Generator::new(seed, catalog.clone(), SignalStrength::default()).generate_session(
        format!("r{seed}"),
        Partition::Train,
        seed,
        phq8,
    )
}

/// Runs every component check. With `fault` set, the tape's backward pass
/// is deliberately broken and failures are expected.
pub fn gradcheck_suite(fault: BackwardFault, seed: u64) -> Result<Vec<ComponentCheck>> {
    let mut out = Vec::new();
    let mut rng = SeededRng::new(seed);
    for (name, shapes, op) in primitive_cases() {
        let params: Vec<Tensor<f64>> = shapes.iter().map(|s| randn(&mut rng, s)).collect();
        let check = GradCheck {
            fault,
            ..GradCheck::default()
        };
        let report = check.run(&params, |t, v| {
            let y = op(t, v)?;
            weighted_sum(t, y)
        })?;
        out.push(ComponentCheck {
            name: name.into(),
            max_rel_error: report.max_rel_error,
            checked: report.checked,
        });
    }
    for (name, shape, build) in layer_cases() {
        let mut store = ParamStore::new();
        let layer = build(&mut store, &mut rng)?;
        let x = randn(&mut rng, &shape);
        let (err, n) = check_store(&store, fault, usize::MAX, seed, |f| {
            let xv = f.tape.constant(x.clone());
            let y = layer(f, xv)?;
            weighted_sum(&mut f.tape, y)
        })?;
        out.push(ComponentCheck {
            name: name.into(),
            max_rel_error: err,
            checked: n,
        });
    }
    {
        let pred = randn(&mut rng, &[4]);
        let truth = randn(&mut rng, &[4]);
        let check = GradCheck {
            fault,
            ..GradCheck::default()
        };
        let r = check.run(&[pred], |t, v| {
            let y = t.constant(truth.clone());
            mse_loss(t, v[0], y)
        })?;
        out.push(ComponentCheck {
            name: "loss.mse".into(),
            max_rel_error: r.max_rel_error,
            checked: r.checked,
        });
    }
    let catalog = tiny_catalog();
    for (i, cfg) in zoo().iter().enumerate() {
        let cfg = tiny_config(cfg);
        let model = Model::<f64>::build(&cfg, &catalog, seed.wrapping_add(i as u64))?;
        let session = random_session(&catalog, seed.wrapping_add(100 + i as u64), 12)?;
        let (err, n) = check_store(model.params(), fault, 24, seed, |f| {
            let inputs = model.bind_inputs(f, &session)?;
            let y = model.forward(f, &inputs)?.output;
            weighted_sum(&mut f.tape, y)
        })?;
        out.push(ComponentCheck {
            name: format!("model.{}", model_label(&cfg)),
            max_rel_error: err,
            checked: n,
        });
    }
    Ok(out)
}

/// `single.<feature>` or the fusion kind name.
pub fn model_label(cfg: &ModelConfig) -> String {
    match cfg.kind {
        crate::modelzoo::ModelKind::SingleFeature => format!("single.{}", cfg.features[0]),
        k => k.to_string(),
    }
}
