//! Experiment phases: pretraining the motor controller, freezing it,
//! transfer training on top of it, and the analysis sweeps.

mod freeze;
mod grid;
mod noise;
mod pretrain;
mod transfer;

pub use freeze::{body_hash, extract_and_freeze, wire_low_level, FrozenLowLevel};
pub use grid::{grid_cells, grid_search, CellRunner, GridCell, GridOutcome};
pub use noise::{
    analyze_noise, conditions, ConditionResult, ConditionStats, NoiseCondition, Trajectory,
};
pub use pretrain::{pretrain, PretrainOutcome, SIGMA_BOUNDS_KEY, TRACKS};
pub use transfer::{transfer, TransferOutcome};
