//! Config-driven experiment runner over the fixed-point iteration
//! library: a strict TOML schema, a registry of built-in experiments,
//! deterministic seeded ensembles, and CSV/JSON artifact emission.

pub mod builtin;
pub mod config;
pub mod output;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{run_experiment, RunError, RunSummary};
