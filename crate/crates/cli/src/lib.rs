//! Configuration-driven runs of the bflow-core algorithms.
//!
//! A run reads a JSON configuration, executes one command over its initial
//! conditions and writes per-record CSV files, command-specific JSON and a
//! `manifest.json` describing every record.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, Command, RunConfig};
pub use error::{CliError, Result};
pub use run::{run, RunReport, MANIFEST_FILE};
