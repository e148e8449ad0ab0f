//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records operations as they are evaluated; [`Tape::backward`]
//! walks the recording in reverse to accumulate adjoints. Adjoints are
//! themselves built out of recorded operations, so a gradient produced with
//! [`Tape::backward_graph`] is an ordinary node that a second backward pass
//! can differentiate — this is what lets gradient penalties train through
//! `‖∇_x h(x)‖₂`.
//!
//! A tape is single-threaded. Distinct tapes may be built and evaluated
//! concurrently; [`Tensor`] values are immutable once created.

mod tape;
mod tensor;

pub use tape::{sigmoid_scalar, AdError, NodeId, OpTag, Tape};
pub use tensor::Tensor;
