use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::init::glorot_matrix;
use crate::layers::params::{Frame, ParamId, ParamStore};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// LSTM cell parameters. Gate blocks of `w_x`, `w_h` and `b` are stacked in
/// the order input, forget, cell candidate, output; the forget-gate bias
/// starts at 1.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::Config(format!(
                "{name}: LSTM sizes must be positive"
            )));
        }
        let w_x = store.add(format!("{name}.w_x"), glorot_matrix(4 * hidden, input, rng))?;
        let w_h = store.add(
            format!("{name}.w_h"),
            glorot_matrix(4 * hidden, hidden, rng),
        )?;
        let mut bias = Tensor::zeros(&[4 * hidden]);
        for v in &mut bias.data_mut()[hidden..2 * hidden] {
            *v = T::one();
        }
        let b = store.add(format!("{name}.b"), bias)?;
        Ok(Self {
            w_x,
            w_h,
            b,
            input,
            hidden,
        })
    }

    /// One recurrence step from an input frame `x_t: [in]`.
    pub fn step<T: Scalar>(
        &self,
        frame: &mut Frame<T>,
        x_t: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<(Var, Var)> {
        if frame.tape.shape(x_t) != [self.input] {
            return Err(Error::dim(
                "lstm_step",
                frame.tape.shape(x_t),
                &[self.input],
            ));
        }
        let (w_x, b) = (frame.p(self.w_x), frame.p(self.b));
        let xw = frame.tape.matmul(w_x, x_t)?;
        let z = frame.tape.add(xw, b)?;
        self.step_projected(frame, z, h_prev, c_prev)
    }

    /// Input projection of a whole sequence: `x·W_xᵀ + b`, shape `[T, 4H]`.
    pub fn project<T: Scalar>(&self, frame: &mut Frame<T>, x: Var) -> Result<Var> {
        let s = frame.tape.shape(x);
        if s.len() != 2 || s[1] != self.input {
            return Err(Error::dim("lstm_project", s, &[self.input]));
        }
        let (w_x, b) = (frame.p(self.w_x), frame.p(self.b));
        let xw = frame.tape.matmul_bt(x, w_x)?;
        frame.tape.add(xw, b)
    }

    /// Step from a precomputed input projection `z_x: [4H]`.
    pub fn step_projected<T: Scalar>(
        &self,
        frame: &mut Frame<T>,
        z_x: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<(Var, Var)> {
        let hsz = self.hidden;
        for v in [h_prev, c_prev] {
            if frame.tape.shape(v) != [hsz] {
                return Err(Error::dim("lstm_step", frame.tape.shape(v), &[hsz]));
            }
        }
        let w_h = frame.p(self.w_h);
        let tape = &mut frame.tape;
        let hw = tape.matmul(w_h, h_prev)?;
        let z = tape.add(z_x, hw)?;
        let i = tape.slice_last(z, 0, hsz)?;
        let i = tape.sigmoid(i);
        let f = tape.slice_last(z, hsz, hsz)?;
        let f = tape.sigmoid(f);
        let g = tape.slice_last(z, 2 * hsz, hsz)?;
        let g = tape.tanh(g);
        let o = tape.slice_last(z, 3 * hsz, hsz)?;
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs over `x: [T, in]` from zero state, returning the hidden states in
    /// time order as `[T, H]`. `reverse` processes right to left.
    pub fn run<T: Scalar>(&self, frame: &mut Frame<T>, x: Var, reverse: bool) -> Result<Var> {
        let steps = frame.tape.shape(x)[0];
        let proj = self.project(frame, x)?;
        let mut h = frame.tape.constant(Tensor::zeros(&[self.hidden]));
        let mut c = frame.tape.constant(Tensor::zeros(&[self.hidden]));
        let mut outputs = Vec::with_capacity(steps);
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..steps).rev())
        } else {
            Box::new(0..steps)
        };
        for t in order {
            let z_x = frame.tape.row(proj, t)?;
            (h, c) = self.step_projected(frame, z_x, h, c)?;
            outputs.push(h);
        }
        if reverse {
            outputs.reverse();
        }
        frame.tape.stack(&outputs)
    }
}

/// Bidirectional LSTM layer; output row `t` is `[h_fwd_t ; h_bwd_t]`.
#[derive(Clone, Debug)]
pub struct Blstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

impl Blstm {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Self {
            fwd: LstmCell::new(store, &format!("{name}.fwd"), input, hidden, rng)?,
            bwd: LstmCell::new(store, &format!("{name}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn output(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, x: Var) -> Result<Var> {
        let s = frame.tape.shape(x);
        if s.len() != 2 {
            return Err(Error::dim("blstm", s, &[]));
        }
        let f = self.fwd.run(frame, x, false)?;
        let b = self.bwd.run(frame, x, true)?;
        frame.tape.concat(&[f, b], 1)
    }
}

/// Sequential composition of BLSTM layers.
#[derive(Clone, Debug)]
pub struct StackedBlstm {
    pub layers: Vec<Blstm>,
}

impl StackedBlstm {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        input: usize,
        hidden: usize,
        depth: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config(format!("{name}: stack depth must be >= 1")));
        }
        let mut layers = Vec::with_capacity(depth);
        let mut width = input;
        for i in 0..depth {
            let layer = Blstm::new(store, &format!("{name}.blstm{i}"), width, hidden, rng)?;
            width = layer.output();
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    /// Builds a stack from existing layers, checking the width chain.
    pub fn from_layers(layers: Vec<Blstm>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[1].fwd.input != pair[0].output() {
                return Err(Error::dim(
                    "stacked_blstm",
                    &[pair[0].output()],
                    &[pair[1].fwd.input],
                ));
            }
        }
        if layers.is_empty() {
            return Err(Error::Config(
                "stacked BLSTM needs at least one layer".into(),
            ));
        }
        Ok(Self { layers })
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(0, Blstm::output)
    }

    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, mut x: Var) -> Result<Var> {
        for layer in &self.layers {
            x = layer.forward(frame, x)?;
        }
        Ok(x)
    }
}
