//! Experiment harness: configuration, seeded runs with scenarios, operator
//! comparisons, heatmaps and CSV summaries.

pub mod config;
pub mod experiment;
pub mod grid;
pub mod heatmap;
pub mod particle;
pub mod report;
pub mod tabular_suite;

pub use config::{AgentConfig, EnvConfig, ExperimentConfig, RunConfig, Scenario, OUTPUT_ROOT_VAR};
pub use experiment::{run_experiment, scenario_apply, Manifest, RunOptions, SeedOutcome};
pub use heatmap::emit_heatmap;
