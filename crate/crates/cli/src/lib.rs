//! Experiment driver for the plate solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, preset, resolve, Experiment, Overrides, RunConfig, PRESETS};
pub use error::{exit, AppError};
pub use run::{initial_energy, run_experiment, setup, simulate, Report, Setup};
