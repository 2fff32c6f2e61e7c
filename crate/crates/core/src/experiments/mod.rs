//! Monte-Carlo harness: config parsing, scenario sweeps, CSV/JSON output.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, parse_config_str, ConfigError, Scenario, ScenarioConfig};
pub use runner::{run_scenario, RunnerError};
