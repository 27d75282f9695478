use crate::autodiff::{Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::init::{glorot_matrix, glorot_vector};
use crate::layers::params::{AttentionTrace, Frame, ParamId, ParamStore};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Single-query additive attention over the rows of `h: [T, d]`:
/// `e_t = vᵀ tanh(W h_t + b)`, `weights = softmax(e)`,
/// `context = Σ_t weights_t h_t`.
#[derive(Clone, Debug)]
pub struct Attention {
    pub name: String,
    pub w: ParamId,
    pub b: ParamId,
    pub v: ParamId,
    pub dim: usize,
    pub size: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Attended {
    pub context: Var,
    pub weights: Var,
}

impl Attention {
    /// `size` defaults to `dim` when `None`.
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        size: Option<usize>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let size = size.unwrap_or(dim);
        if size == 0 || dim == 0 {
            return Err(Error::Config(format!(
                "{name}: attention sizes must be positive"
            )));
        }
        let w = store.add(format!("{name}.w"), glorot_matrix(size, dim, rng))?;
        let b = store.add(format!("{name}.b"), Tensor::zeros(&[size]))?;
        let v = store.add(format!("{name}.v"), glorot_vector(size, rng))?;
        Ok(Self {
            name: name.to_string(),
            w,
            b,
            v,
            dim,
            size,
        })
    }

    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, h: Var) -> Result<Attended> {
        let s = frame.tape.shape(h);
        if s.len() != 2 || s[1] != self.dim {
            return Err(Error::dim("attention", s, &[self.dim]));
        }
        let (w, b, v) = (frame.p(self.w), frame.p(self.b), frame.p(self.v));
        let tape = &mut frame.tape;
        let proj = tape.matmul_bt(h, w)?;
        let proj = tape.add(proj, b)?;
        let act = tape.tanh(proj);
        let scores = tape.matmul(act, v)?;
        let weights = tape.softmax(scores)?;
        let ht = tape.transpose(h)?;
        let context = tape.matmul(ht, weights)?;
        frame.record(|| AttentionTrace {
            site: self.name.clone(),
            values: h,
            weights,
            context,
        });
        Ok(Attended { context, weights })
    }
}

/// Contiguous window boundaries splitting `len` steps into `windows` parts:
/// window `k` covers `[⌊k·len/windows⌋, ⌊(k+1)·len/windows⌋)`.
pub fn window_bounds(len: usize, windows: usize) -> Result<Vec<(usize, usize)>> {
    if windows == 0 || windows > len {
        return Err(Error::domain(
            "window_bounds",
            format!("cannot split {len} steps into {windows} windows"),
        ));
    }
    Ok((0..windows)
        .map(|k| (k * len / windows, (k + 1) * len / windows))
        .collect())
}

/// Attention pooling inside fixed windows, shortening `[T, d]` to `[L, d]`
/// while keeping temporal order.
#[derive(Clone, Debug)]
pub struct WindowPool {
    pub attention: Attention,
    pub windows: usize,
}

impl WindowPool {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        windows: usize,
        size: Option<usize>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Self {
            attention: Attention::new(store, name, dim, size, rng)?,
            windows,
        })
    }

    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, h: Var) -> Result<Var> {
        let steps = frame.tape.shape(h)[0];
        let mut rows = Vec::with_capacity(self.windows);
        for (start, end) in window_bounds(steps, self.windows)? {
            let chunk = frame.tape.slice_rows(h, start, end - start)?;
            rows.push(self.attention.forward(frame, chunk)?.context);
        }
        frame.tape.stack(&rows)
    }
}

/// Per-timestep attention across several equally long streams `[L, d]`:
/// at each step the stream rows form a small set that is attended to one
/// fused row.
#[derive(Clone, Debug)]
pub struct StreamFusion {
    pub attention: Attention,
}

impl StreamFusion {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        size: Option<usize>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(Self {
            attention: Attention::new(store, name, dim, size, rng)?,
        })
    }

    pub fn forward<T: Scalar>(&self, frame: &mut Frame<T>, streams: &[Var]) -> Result<Var> {
        let first = *streams
            .first()
            .ok_or_else(|| Error::domain("stream_fusion", "no streams"))?;
        let shape = frame.tape.shape(first).to_vec();
        for &s in streams {
            if frame.tape.shape(s) != shape.as_slice() {
                return Err(Error::dim("stream_fusion", &shape, frame.tape.shape(s)));
            }
        }
        let mut fused = Vec::with_capacity(shape[0]);
        for t in 0..shape[0] {
            let rows = streams
                .iter()
                .map(|&s| frame.tape.row(s, t))
                .collect::<Result<Vec<_>>>()?;
            let set = frame.tape.stack(&rows)?;
            fused.push(self.attention.forward(frame, set)?.context);
        }
        frame.tape.stack(&fused)
    }
}
