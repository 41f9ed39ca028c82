//! Declarative experiments, artifacts and acceptance gates for the tilted line ensembles.

pub mod app;
pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod gates;
pub mod runs;
pub mod svg;

pub use app::{execute, RunReport};
pub use config::{Experiment, ExperimentConfig, Scale};
pub use error::{CliError, Result};
