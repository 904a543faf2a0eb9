//! Experiment orchestration for `fracnelson`: JSON configs, reproducible
//! runs, JSON/CSV reports and the acceptance suite.

pub mod cli;
pub mod config;
pub mod output;
pub mod run;
pub mod suite;

pub use config::{ExperimentConfig, SchemaErrors};
pub use run::{run, RunOutput};
pub use suite::{run_suite, SuiteKind, SuiteReport};
