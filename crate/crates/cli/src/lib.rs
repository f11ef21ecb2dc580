//! Driver for the gsprep pipeline: configuration, file formats and the
//! end-to-end run used by the `gsprep` binary.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::{ModelConfig, PipelineConfig, TrialSize};
pub use error::{exit, CliError, CliResult};
pub use pipeline::{emit_histogram, run_pipeline, scan_transition, RunReport, TransitionScan};
