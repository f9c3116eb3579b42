//! Experiment definitions, the run pipeline, comparisons and figures.

pub mod compare;
pub mod config;
pub mod manifest;
pub mod plots;
pub mod runner;

pub use compare::{compare_conditions, CellResult, ComparisonReport, Verdict};
pub use config::{load_config, parse_config, EvalSet, ExperimentId, ExperimentSpec, Scale};
pub use manifest::RunManifest;
pub use plots::export_plots;
pub use runner::{cells, run_cell, run_experiment, Cell};
