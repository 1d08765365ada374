//! Experiment configuration, shipped presets, the two runners and their
//! output formats.

pub mod benchmark;
pub mod config;
pub mod diocotron;
pub mod output;

pub use benchmark::{run_benchmark, write_benchmark, BenchmarkReport, BenchmarkRow};
pub use config::{
    load_config, parse_config, preset, preset_names, BenchmarkConfig, DiocotronConfig, ExperimentConfig, Study, V0Mode,
};
pub use diocotron::{run_diocotron, run_ensemble, DiocotronReport, TimeRow};
