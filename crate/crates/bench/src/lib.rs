//! Experiment harness and file formats for `lowrank-core`.
//!
//! The `lowrank` binary wraps these functions; integration tests and the
//! acceptance suite call them directly.

pub mod config;
pub mod experiment;
pub mod io;

pub use config::{ConfigError, ExperimentConfig, GridSpec, SolverId};
pub use experiment::{phase_grid, run_experiment, run_solver, HarnessError, RunRecord, WallClock};
