//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] is rebuilt for every forward pass. Operations append nodes and
//! return [`Var`] handles; [`Tape::backward`] sweeps the nodes in reverse and
//! accumulates gradients into every node that requires one.

mod gradcheck;
pub(crate) mod kernels;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheck, GradCheckReport, DEFAULT_EPS};
pub use tape::{BackwardFault, Gradients, Tape, Var};
pub use tensor::Tensor;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Numerically stable softmax of a plain slice.
pub fn softmax<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(Error::domain("softmax", "empty input"));
    }
    let mut out = x.to_vec();
    kernels::softmax_in_place(&mut out);
    Ok(out)
}
