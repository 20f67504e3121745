//! Configuration handling and pipeline orchestration for the `volint` binary.

pub mod config;
pub mod pipeline;

pub use config::{validate_config, ConfigErrors, ConfigIssue, RunConfig};
pub use pipeline::{run_analyze, Pipeline, Stage, StageError, Summary};
