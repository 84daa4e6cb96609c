//! Command-line front end for the `kronpde` solver.

pub mod cli;
pub mod commands;
pub mod manifest;
pub mod reproduce;

pub use commands::{expand_sweep, solve_command, sweep_command, truth_command, Prepared, SweepAxes};
pub use manifest::{defaults_for, Resolved, RunManifest};
