use crate::autodiff::kernels;
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnaryKind {
    Tanh,
    Sigmoid,
    Relu,
}

/// Which operand, if any, is a last-axis vector broadcast over the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    None,
    Rhs,
    Lhs,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
    },
    MatMulBt {
        a: Var,
        b: Var,
    },
    Binary {
        kind: BinaryKind,
        a: Var,
        b: Var,
        broadcast: Broadcast,
    },
    Scale {
        x: Var,
        factor: T,
    },
    Unary {
        kind: UnaryKind,
        x: Var,
    },
    Softmax {
        x: Var,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    MaxOverTime {
        x: Var,
        argmax: Vec<usize>,
    },
    Transpose {
        x: Var,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    SliceLast {
        x: Var,
        start: usize,
    },
    Row {
        x: Var,
        index: usize,
    },
    Stack {
        parts: Vec<Var>,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
    Reshape {
        x: Var,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Deliberate backward-rule corruption, used only to prove that the gradient
/// checker catches a broken rule.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackwardFault {
    #[default]
    None,
    TanhBackward,
}

/// Define-by-run gradient tape. Nodes are appended in evaluation order, so
/// every input precedes its consumer.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    fault: BackwardFault,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            fault: BackwardFault::None,
        }
    }

    #[doc(hidden)]
    pub fn with_fault(fault: BackwardFault) -> Self {
        Self {
            nodes: Vec::new(),
            fault,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that participates in differentiation.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// `a[m,k] · b[k,n]`, or `a[m,k] · b[k]` giving `[m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() != 2 || sb.len() > 2 || sa[1] != sb[0] {
            return Err(Error::dim("matmul", sa, sb));
        }
        let (m, k) = (sa[0], sa[1]);
        let n = if sb.len() == 2 { sb[1] } else { 1 };
        let mut out = vec![T::zero(); m * n];
        kernels::matmul_acc(va.data(), vb.data(), &mut out, m, k, n);
        let shape = if sb.len() == 2 { vec![m, n] } else { vec![m] };
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MatMul { a, b }, &[a, b]))
    }

    /// `a[m,k] · b[n,k]ᵀ` giving `[m,n]`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::dim("matmul_bt", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[0]);
        let mut out = vec![T::zero(); m * n];
        kernels::matmul_bt_acc(va.data(), vb.data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        Ok(self.push(value, Op::MatMulBt { a, b }, &[a, b]))
    }

    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let broadcast = if va.shape() == vb.shape() {
            Broadcast::None
        } else if vb.rank() == 1 && va.last_dim() == vb.len() {
            Broadcast::Rhs
        } else if va.rank() == 1 && vb.last_dim() == va.len() {
            Broadcast::Lhs
        } else {
            return Err(Error::dim(
                match kind {
                    BinaryKind::Add => "add",
                    BinaryKind::Sub => "sub",
                    BinaryKind::Mul => "mul",
                },
                va.shape(),
                vb.shape(),
            ));
        };
        let f = |x: T, y: T| match kind {
            BinaryKind::Add => x + y,
            BinaryKind::Sub => x - y,
            BinaryKind::Mul => x * y,
        };
        let value = match broadcast {
            Broadcast::None => {
                let data = va
                    .data()
                    .iter()
                    .zip(vb.data())
                    .map(|(&x, &y)| f(x, y))
                    .collect();
                Tensor::new(va.shape().to_vec(), data)?
            }
            Broadcast::Rhs => {
                let n = vb.len();
                let data = va
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| f(x, vb.data()[i % n]))
                    .collect();
                Tensor::new(va.shape().to_vec(), data)?
            }
            Broadcast::Lhs => {
                let n = va.len();
                let data = vb
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| f(va.data()[i % n], y))
                    .collect();
                Tensor::new(vb.shape().to_vec(), data)?
            }
        };
        Ok(self.push(
            value,
            Op::Binary {
                kind,
                a,
                b,
                broadcast,
            },
            &[a, b],
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let value = self.value(x).map(|v| v * factor);
        self.push(value, Op::Scale { x, factor }, &[x])
    }

    fn unary(&mut self, kind: UnaryKind, x: Var) -> Var {
        let value = self.value(x).map(|v| match kind {
            UnaryKind::Tanh => v.tanh(),
            UnaryKind::Sigmoid => kernels::sigmoid(v),
            UnaryKind::Relu => v.max(T::zero()),
        });
        self.push(value, Op::Unary { kind, x }, &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Sigmoid, x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Relu, x)
    }

    /// Softmax over the last axis (row-wise for matrices), max-subtracted.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let vx = self.value(x);
        if vx.rank() > 2 {
            return Err(Error::dim("softmax", vx.shape(), &[]));
        }
        let n = vx.last_dim();
        let mut out = vx.data().to_vec();
        for row in out.chunks_mut(n) {
            kernels::softmax_in_place(row);
        }
        let value = Tensor::new(vx.shape().to_vec(), out)?;
        Ok(self.push(value, Op::Softmax { x }, &[x]))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::domain("concat", "no parts"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::domain(
                "concat",
                format!("axis {axis} out of range for {base:?}"),
            ));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let agree = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !agree {
                return Err(Error::dim("concat", &base, s));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let v = self.value(p);
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            parts,
        ))
    }

    /// Per-column maximum over the rows of `h[T,d]`; ties resolve to the
    /// lowest row index.
    pub fn max_over_time(&mut self, h: Var) -> Result<Var> {
        let vh = self.value(h);
        if vh.rank() != 2 {
            return Err(Error::dim("max_over_time", vh.shape(), &[]));
        }
        let (t, d) = (vh.shape()[0], vh.shape()[1]);
        let mut argmax = vec![0usize; d];
        let mut best = vh.row(0).to_vec();
        for r in 1..t {
            for (j, &v) in vh.row(r).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    argmax[j] = r;
                }
            }
        }
        let value = Tensor::vector(best);
        Ok(self.push(value, Op::MaxOverTime { x: h, argmax }, &[h]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let vx = self.value(x);
        if vx.rank() != 2 {
            return Err(Error::dim("transpose", vx.shape(), &[]));
        }
        let (r, c) = (vx.shape()[0], vx.shape()[1]);
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = vx.data()[i * c + j];
            }
        }
        let value = Tensor::new(vec![c, r], out)?;
        Ok(self.push(value, Op::Transpose { x }, &[x]))
    }

    /// Rows `[start, start + len)` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let vx = self.value(x);
        if vx.rank() != 2 || len == 0 || start + len > vx.shape()[0] {
            return Err(Error::dim("slice_rows", vx.shape(), &[start, len]));
        }
        let value = vx.slice_rows(start, len);
        Ok(self.push(value, Op::SliceRows { x, start }, &[x]))
    }

    /// Entries `[start, start + len)` along the last axis.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let vx = self.value(x);
        let n = vx.last_dim();
        if len == 0 || start + len > n {
            return Err(Error::dim("slice_last", vx.shape(), &[start, len]));
        }
        let mut data = Vec::with_capacity(vx.outer_len() * len);
        for row in vx.data().chunks(n) {
            data.extend_from_slice(&row[start..start + len]);
        }
        let mut shape = vx.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::SliceLast { x, start }, &[x]))
    }

    /// Row `index` of a matrix as a vector.
    pub fn row(&mut self, x: Var, index: usize) -> Result<Var> {
        let vx = self.value(x);
        if vx.rank() != 2 || index >= vx.shape()[0] {
            return Err(Error::dim("row", vx.shape(), &[index]));
        }
        let value = Tensor::vector(vx.row(index).to_vec());
        Ok(self.push(value, Op::Row { x, index }, &[x]))
    }

    /// Stacks equal-length vectors into the rows of a matrix.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::domain("stack", "no parts"))?;
        let d = self.value(*first).len();
        let mut data = Vec::with_capacity(parts.len() * d);
        for &p in parts {
            let v = self.value(p);
            if v.rank() != 1 || v.len() != d {
                return Err(Error::dim("stack", &[d], v.shape()));
            }
            data.extend_from_slice(v.data());
        }
        let value = Tensor::new(vec![parts.len(), d], data)?;
        Ok(self.push(
            value,
            Op::Stack {
                parts: parts.to_vec(),
            },
            parts,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum { x }, &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let value = Tensor::scalar(v.sum() / T::of(v.len() as f64));
        self.push(value, Op::Mean { x }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape.to_vec())?;
        Ok(self.push(value, Op::Reshape { x }, &[x]))
    }

    /// Reverse sweep from a scalar `loss`, seeded with 1.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lv.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let (before, after) = grads.split_at_mut(i);
            let Some(g) = after[0].as_ref() else {
                continue;
            };
            self.backprop_node(node, g.data(), before);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Tensor<T>>]) {
        // Accumulation buffer for input `v`, or `None` when `v` needs no gradient.
        let nodes = &self.nodes;
        let slot = |v: Var, grads: &mut [Option<Tensor<T>>]| -> bool {
            if !nodes[v.0].requires_grad {
                return false;
            }
            if grads[v.0].is_none() {
                grads[v.0] = Some(Tensor::zeros(nodes[v.0].value.shape()));
            }
            true
        };
        macro_rules! buf {
            ($v:expr) => {
                grads[$v.0].as_mut().unwrap().data_mut()
            };
        }

        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = if vb.rank() == 2 { vb.shape()[1] } else { 1 };
                if slot(*a, grads) {
                    // dA = dC · Bᵀ
                    kernels::matmul_bt_acc(g, vb.data(), buf!(a), m, n, k);
                }
                if slot(*b, grads) {
                    // dB = Aᵀ · dC
                    kernels::matmul_at_acc(va.data(), g, buf!(b), m, k, n);
                }
            }
            Op::MatMulBt { a, b } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.shape()[0], va.shape()[1], vb.shape()[0]);
                if slot(*a, grads) {
                    // dA = dC · B
                    kernels::matmul_acc(g, vb.data(), buf!(a), m, n, k);
                }
                if slot(*b, grads) {
                    // dB = dCᵀ · A
                    kernels::matmul_at_acc(g, va.data(), buf!(b), m, n, k);
                }
            }
            Op::Binary {
                kind,
                a,
                b,
                broadcast,
            } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (ga, gb) = (slot(*a, grads), slot(*b, grads));
                // Index into the full-size operand and the broadcast one.
                let (na, nb) = (va.len(), vb.len());
                for (idx, &gi) in g.iter().enumerate() {
                    let ia = match broadcast {
                        Broadcast::Lhs => idx % na,
                        _ => idx,
                    };
                    let ib = match broadcast {
                        Broadcast::Rhs => idx % nb,
                        _ => idx,
                    };
                    let (da, db) = match kind {
                        BinaryKind::Add => (gi, gi),
                        BinaryKind::Sub => (gi, -gi),
                        BinaryKind::Mul => (gi * vb.data()[ib], gi * va.data()[ia]),
                    };
                    if ga {
                        buf!(a)[ia] += da;
                    }
                    if gb {
                        buf!(b)[ib] += db;
                    }
                }
            }
            Op::Scale { x, factor } => {
                if slot(*x, grads) {
                    for (d, &gi) in buf!(x).iter_mut().zip(g) {
                        *d += gi * *factor;
                    }
                }
            }
            Op::Unary { kind, x } => {
                if slot(*x, grads) {
                    let y = node.value.data();
                    let xin = self.value(*x).data();
                    let broken = self.fault == BackwardFault::TanhBackward;
                    let dst = buf!(x);
                    for i in 0..g.len() {
                        let local = match kind {
                            UnaryKind::Tanh if broken => T::one() - y[i],
                            UnaryKind::Tanh => T::one() - y[i] * y[i],
                            UnaryKind::Sigmoid => y[i] * (T::one() - y[i]),
                            UnaryKind::Relu => {
                                if xin[i] > T::zero() {
                                    T::one()
                                } else {
                                    T::zero()
                                }
                            }
                        };
                        dst[i] += g[i] * local;
                    }
                }
            }
            Op::Softmax { x } => {
                if slot(*x, grads) {
                    let y = node.value.data();
                    let n = node.value.last_dim();
                    let dst = buf!(x);
                    for r in 0..y.len() / n {
                        let (yr, gr) = (&y[r * n..(r + 1) * n], &g[r * n..(r + 1) * n]);
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for j in 0..n {
                            dst[r * n + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::Concat { parts, axis } => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut offset = 0;
                for &p in parts {
                    let chunk = self.shape(p)[*axis] * inner;
                    if slot(p, grads) {
                        let dst = buf!(p);
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + chunk];
                            for (d, &s) in dst[o * chunk..(o + 1) * chunk].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    offset += chunk;
                }
            }
            Op::MaxOverTime { x, argmax } => {
                if slot(*x, grads) {
                    let d = argmax.len();
                    let dst = buf!(x);
                    for (j, &r) in argmax.iter().enumerate() {
                        dst[r * d + j] += g[j];
                    }
                }
            }
            Op::Transpose { x } => {
                if slot(*x, grads) {
                    let s = self.shape(*x);
                    let (r, c) = (s[0], s[1]);
                    let dst = buf!(x);
                    for i in 0..r {
                        for j in 0..c {
                            dst[i * c + j] += g[j * r + i];
                        }
                    }
                }
            }
            Op::SliceRows { x, start } => {
                if slot(*x, grads) {
                    let c = node.value.last_dim();
                    let dst = &mut buf!(x)[start * c..start * c + g.len()];
                    for (d, &s) in dst.iter_mut().zip(g) {
                        *d += s;
                    }
                }
            }
            Op::SliceLast { x, start } => {
                if slot(*x, grads) {
                    let len = node.value.last_dim();
                    let n = self.value(*x).last_dim();
                    let dst = buf!(x);
                    for (r, gr) in g.chunks(len).enumerate() {
                        for (j, &s) in gr.iter().enumerate() {
                            dst[r * n + start + j] += s;
                        }
                    }
                }
            }
            Op::Row { x, index } => {
                if slot(*x, grads) {
                    let c = g.len();
                    let dst = &mut buf!(x)[index * c..(index + 1) * c];
                    for (d, &s) in dst.iter_mut().zip(g) {
                        *d += s;
                    }
                }
            }
            Op::Stack { parts } => {
                let d = node.value.last_dim();
                for (r, &p) in parts.iter().enumerate() {
                    if slot(p, grads) {
                        for (dst, &s) in buf!(p).iter_mut().zip(&g[r * d..(r + 1) * d]) {
                            *dst += s;
                        }
                    }
                }
            }
            Op::Sum { x } => {
                if slot(*x, grads) {
                    for d in buf!(x).iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Mean { x } => {
                if slot(*x, grads) {
                    let dst = buf!(x);
                    let share = g[0] / T::of(dst.len() as f64);
                    for d in dst.iter_mut() {
                        *d += share;
                    }
                }
            }
            Op::Reshape { x } => {
                if slot(*x, grads) {
                    for (d, &s) in buf!(x).iter_mut().zip(g) {
                        *d += s;
                    }
                }
            }
        }
    }
}
