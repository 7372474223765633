//! Network components: dense layers, an LSTM cell, the frozen-able
//! low-level controller, the recurrent high-level controller with its
//! clocked control channel, value networks, and flat baselines.

mod baseline;
mod hierarchy;
mod highlevel;
mod layers;
mod lowlevel;
mod lstm;
mod value;

pub use baseline::{FfPolicy, InitFfPolicy, RecurrentPolicy};
pub use hierarchy::{tau, ClockState, ClockedHierarchy, HlMode, StepOutput};
pub use highlevel::{reparam_sample, HighLevelController, HlState};
pub use layers::{Linear, SigmaHead};
pub use lowlevel::LowLevelController;
pub use lstm::LstmCell;
pub use value::{FfValue, RecurrentValue, RecurrentValueState};

/// Width of the control channel between the two levels. Fixed by
/// construction: no configuration knob feeds into it.
pub const CONTROL_DIM: usize = 10;

use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::error::Result;
use rand::Rng;

/// Weights drawn uniform in +-1/sqrt(fan_in); biases start at zero unless a
/// layer overrides them (LSTM forget gate, sigma heads).
pub(crate) fn init_weight(
    store: &mut ParamStore,
    name: String,
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> Result<ParamId> {
    let bound = 1.0 / (cols as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    store.add(name, Tensor::matrix(rows, cols, data)?, true)
}

pub(crate) fn init_bias(store: &mut ParamStore, name: String, n: usize) -> Result<ParamId> {
    store.add(name, Tensor::vector(vec![0.0; n])?, true)
}
