//! Configuration, CSV emission and pipeline orchestration behind the `weylrat` binary.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{ConfigError, Mode, RunConfig};
pub use run::{run, CliError, Outcome};
