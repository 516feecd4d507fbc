//! File formats, configuration and the command-line driver around `wgfh-core`.

pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Kind};
pub use error::RunError;
pub use manifest::RunManifest;
pub use report::{report, Report};
pub use run::{compute, run, Artifacts};
