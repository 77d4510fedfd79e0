//! Scenario files, simulation construction and run artifacts.

pub mod artifacts;
pub mod build;
pub mod config;

pub use artifacts::{compare, compare_dirs, csv_bytes, read_csv, write_artifacts, Comparison, Timeseries};
pub use build::{build, run_scenario};
pub use config::{bundled_scenario, load_config, parse_config, ScenarioConfig, BUNDLED_SCENARIOS};
