//! Reverse-mode automatic differentiation on a flat tape, sized for the
//! small dense networks in this crate: rank <= 2 tensors, f64 everywhere,
//! eager forward evaluation, one backward pass per scalar loss.

pub mod check;
mod params;
mod tape;
mod tensor;

pub use params::{BoundParams, GradSet, ParamEntry, ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Shape, Tensor};
