//! Batch experiments over random scenarios, summary statistics and report
//! files.

pub mod experiment;
pub mod fvi_study;
pub mod report;
pub mod stats;

pub use experiment::{run_contraction_experiment, run_on_models, ExperimentOutput, RunRecord, ScenarioRecord, ScenarioSpec};
pub use fvi_study::{prepare_fvi, run_fvi_reps, FviSetup, FviStudySpec};
pub use stats::{bootstrap_ci, prob_superiority, skewness, SummaryStats};
