//! Experiment harness, configuration and file formats around `econet-core`.

pub mod config;
pub mod experiments;
pub mod oracle;
pub mod output;
pub mod seed;
pub mod stats;

pub use config::{ConfigError, RunConfig, ScenarioSpec, SweepSpec};
pub use experiments::{
    find_l_for_omega, normalize_surface, run, scenario_triplet, sweep, ExperimentError,
    RunResult, ScenarioReport, SweepCell, SweepSurface,
};
