//! Damped nonlinear plate dynamics on the strip `(0, pi) x (-d, d)`.
//!
//! The plate is hinged at `x = 0, pi` and free at `y = +-d`. Space is
//! discretized with summation-by-parts finite differences, time with the
//! average-acceleration Newmark scheme. A tempered fractional damping term is
//! realized through its diffusive representation and an infinite viscoelastic
//! memory through the relative-history transport variable.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod embedding;
pub mod energy;
pub mod error;
pub mod fractional;
pub mod grid;
pub mod linalg;
pub mod memory;
pub mod newmark;
pub mod par;
pub mod plate;
pub mod sbp;
pub mod source;
pub mod sparse;

pub use embedding::{d_scaling_probe, elastic_eigenpair, estimate_ce, smallest_eigenpair, EigenOptions, EigenPair};
pub use energy::{
    energy, fit_decay_rate, threshold_check, DecayFit, EnergyConventions, EnergyRecord,
    SourceEnergy, ThresholdReport,
};
pub use error::{PlateError, Result};
pub use fractional::{FractionalConfig, FractionalParams, FractionalState};
pub use grid::{build_grid, Grid, GridConfig, YLayout};
pub use memory::{History, Kernel, MemoryConfig, MemoryParams, MemoryState};
pub use newmark::{RunArtifact, RunOutcome, SchemeFlags, SimState, Simulation, StepReport, StepperConfig};
pub use par::Exec;
pub use plate::{assemble_plate, solve_static, PlateSystem, SolverConfig};
pub use sbp::{build_sbp_1d, build_sbp_2d, Sbp1D, Sbp2D};
pub use source::{discrete_gradient, source_field, SourceParams};
pub use sparse::CsrMatrix;
