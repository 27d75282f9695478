//! Neural layers built on the autodiff tape: dense stacks, LSTM cells,
//! (stacked) bidirectional LSTMs and additive attention.
//!
//! Layers own [`ParamId`]s into a [`ParamStore`]; a forward pass binds the
//! store onto a fresh [`Frame`] and the layers read their parameters from it.

mod attention;
mod dense;
pub mod init;
mod lstm;
mod params;

pub use attention::{window_bounds, Attended, Attention, StreamFusion, WindowPool};
pub use dense::{Activation, Dense, FeedForward};
pub use lstm::{Blstm, LstmCell, StackedBlstm};
pub use params::{AttentionTrace, Frame, Param, ParamId, ParamStore};
