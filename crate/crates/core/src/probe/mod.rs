//! Hidden-state capture and analysis.

pub mod analysis;
pub mod dataset;
pub mod linear;
pub mod pca;
pub mod trace;

pub use analysis::{correct_colour_fraction, per_unit_correlation, task_allocation_correlation, throughput, UnitCorrelation};
pub use dataset::{FeatureMode, Label, ProbeDataset, Split};
pub use linear::{distance_aware_accuracy, random_feature_probe, train_probe, ProbeResult, PROBE_LR, PROBE_STEPS};
pub use pca::{pca_project, Pca};
pub use trace::{capture, read_traces, write_traces, HiddenTrace, TraceHeader};
