//! Configuration, experiment presets and data export for the Berry-phase
//! dephasing simulator.

pub mod config;
pub mod preset;

pub use config::{load_config, parse_config, ConfigErrors, ConfigIssue, ExperimentConfig};
pub use preset::{read_manifest, rerun, run_preset, Manifest, PresetName, RunOptions};
