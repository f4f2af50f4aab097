//! Configuration, presets, output and the command-line operations.

pub mod check;
pub mod config;
pub mod convergence;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, run_file, RunError, Setup};
