//! Experiment harness for the `rfpuf-core` simulator: configs, dataset
//! generation, training and evaluation runs, sweeps, and the CSV and JSON
//! files they leave behind.
//!
//! A run is fully determined by its [`ExperimentConfig`]; every seed is
//! derived from `master_seed` by [`rfpuf_core::seed::mix`].

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod io;
pub mod model;
pub mod sweep;

pub use config::ExperimentConfig;
pub use dataset::{generate_dataset, Dataset, FrameRecord, Split};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, run_with_dataset, Metrics, RunResult};
pub use sweep::{run_sweep, SweepSpec, SweepVariable};
