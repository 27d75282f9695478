use serde::{Deserialize, Serialize};

use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::init::glorot_matrix;
use crate::layers::params::{Frame, ParamId, ParamStore};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer `activation(W·x + b)` with `W: [out, in]`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let w = store.add(format!("{name}.w"), glorot_matrix(output, input, rng))?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[output]))?;
        Ok(Self {
            w,
            b,
            activation,
            input,
            output,
        })
    }

    /// Accepts `x: [in]` or a batch of rows `x: [n, in]`.
    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, x: Var) -> Result<Var> {
        let shape = frame.tape.shape(x).to_vec();
        if *shape.last().unwrap() != self.input || shape.len() > 2 {
            return Err(Error::dim("dense", &shape, &[self.output, self.input]));
        }
        let (w, b) = (frame.p(self.w), frame.p(self.b));
        let z = if shape.len() == 1 {
            frame.tape.matmul(w, x)?
        } else {
            frame.tape.matmul_bt(x, w)?
        };
        let z = frame.tape.add(z, b)?;
        Ok(match self.activation {
            Activation::Relu => frame.tape.relu(z),
            Activation::Identity => z,
        })
    }
}

/// Stack of dense layers: ReLU on every hidden layer, identity on the last.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub layers: Vec<Dense>,
}

impl FeedForward {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        widths: &[usize],
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Config(format!(
                "{name}: feedforward needs at least one width"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            let act = if i + 1 == widths.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Dense::new(
                store,
                &format!("{name}.dense{i}"),
                prev,
                w,
                act,
                rng,
            )?);
            prev = w;
        }
        Ok(Self { layers })
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            x = layer.forward(frame, x)?;
        }
        Ok(x)
    }
}
