//! Files, configuration and commands around `prism-core`: dataset
//! directories with PNG images, task and score files, checkpoints, run
//! manifests, analysis reports and the shipped result-table fixture.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fixture;
pub mod manifest;
pub mod png;
pub mod report;
pub mod run;
pub mod scores;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
