//! Config parsing, orchestration and artefact output for the `fluctsel` binary.

pub mod config;
pub mod manifest;
pub mod run;
pub mod verify;

pub use config::{parse_config, parse_config_str, ConfigErrors, ExperimentSpec, Job, Kind};
pub use run::{run_spec, Check, RunReport};
pub use verify::verify;
