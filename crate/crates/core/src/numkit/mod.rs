//! Minimal dense-tensor math with reverse-mode differentiation.
//!
//! Everything is `f64` and row-major. The only structures are [`Tensor`]
//! (a plain value), [`ParamStore`] (named learnable tensors), and [`Tape`]
//! (a computation record supporting one backward pass). There is no
//! broadcasting beyond bias-add and row-scaling; shapes are checked on
//! every op and all outputs are verified finite.

mod linalg;
mod tape;
mod tensor;

pub use linalg::{matmul_into, matmul_nt_into, matmul_tn_into};
pub use tape::{Grads, NodeId, Tape};
pub use tensor::{ParamId, ParamStore, Tensor};
