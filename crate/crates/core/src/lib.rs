//! Core library for a two-level locomotion controller: a feedforward
//! low-level network that drives a planar swimmer, modulated through a
//! narrow control channel by a recurrent high-level network, plus the
//! policy-gradient machinery to pretrain, freeze, and transfer it.

pub mod autodiff;
pub mod env;
pub mod error;
pub mod experiment;
pub mod io;
pub mod learn;
pub mod nets;

pub use autodiff::{
    BoundParams, GradSet, Gradients, ParamEntry, ParamId, ParamStore, Shape, Tape, Tensor, Var,
};
pub use error::{Error, Result};
