//! Planar swimmer simulation and the tasks defined on top of it.

mod dynamics;
mod geometry;
mod tasks;

pub use dynamics::{Swimmer, SwimmerParams, SwimmerState};
pub use geometry::{Canyon, Segment};
pub use tasks::{Observation, StepResult, SwimEnv, TaskKind, TaskSpec, TrackShape};
