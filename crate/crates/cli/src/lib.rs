//! Scenario registry, configuration loading and output writers for the
//! `oscctl` command-line tool.

pub mod config;
pub mod csv;
pub mod error;
pub mod registry;
pub mod report;
pub mod run;
pub mod svg;

pub use config::{parse_config, Override, ScenarioFile};
pub use error::{CliError, Result};
pub use report::{RunReport, Status};
pub use run::{load, run_loaded, Loaded};
