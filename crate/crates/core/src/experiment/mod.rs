//! Experiment orchestration: configuration, on-disk formats and the
//! evolve / reevaluate / analyze pipeline.

pub mod config;
pub mod store;
pub mod workflow;

pub use config::{ExperimentConfig, RunSpec};
pub use store::{ReevalRow, Table};
pub use workflow::{
    analyze, evolve, export_plots, load_runs, merged_front, reevaluate, simulate, AnalysisSummary,
    LoadedRun, MergedPoint, ReevalOptions, RunSnapshot,
};
