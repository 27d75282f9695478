//! Multi-level attention BLSTM networks for multimodal depression-severity
//! regression, with a from-scratch reverse-mode autodiff core, a synthetic
//! corpus generator, the AVEC metric suite and a training loop.

pub mod autodiff;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod modelzoo;
pub mod rng;
pub mod scalar;
pub mod synthdata;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tape64 = autodiff::Tape<f64>;
pub type ParamStore64 = layers::ParamStore<f64>;
pub type Model64 = modelzoo::Model<f64>;
pub type Model32 = modelzoo::Model<f32>;
