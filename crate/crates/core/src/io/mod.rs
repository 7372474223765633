//! Run configuration, checkpoint persistence, and CSV emission.

mod checkpoint;
mod config;
mod csvout;

pub use checkpoint::{crc32, write_atomic, Checkpoint, CheckpointArray};
pub use config::{
    fingerprint, BaselineKind, Config, EnvSection, ExperimentSection, GridSection,
    LearnerSection, PolicySection, TaskName,
};
pub use csvout::{
    curve_row, grid_row, trajectory_header, trajectory_row, write_csv, write_curve, write_grid,
    GridRow, CURVE_HEADER, GRID_HEADER,
};
