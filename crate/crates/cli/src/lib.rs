//! Experiment orchestration for qemlab: TOML configs, ε-sweeps toward the
//! zero-noise limit, single runs with full artifacts, and manifests.

pub mod config;
pub mod manifest;
pub mod observable;
pub mod pipeline;
pub mod reference;

pub use config::{ConfigError, ExperimentConfig, Mode};
pub use manifest::Manifest;
pub use pipeline::{run_oracle, run_regions, run_simulate, run_single, run_sweep, PipelineError, SingleReport, SweepReport, SweepRow};

/// Exit code of a sweep that converged.
pub const EXIT_CONVERGED: i32 = 0;
/// Exit code of any failure.
pub const EXIT_ERROR: i32 = 1;
/// Exit code of a sweep that ran to completion without converging.
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// JSON schema of `report.json` written by `sweep`.
pub const SWEEP_REPORT_SCHEMA: &str = include_str!("../schema/sweep_report.schema.json");
/// JSON schema of `manifest.json`.
pub const MANIFEST_SCHEMA: &str = include_str!("../schema/manifest.schema.json");

pub fn sweep_exit_code(report: &SweepReport) -> i32 {
    if report.error.is_some() {
        EXIT_ERROR
    } else if report.converged {
        EXIT_CONVERGED
    } else {
        EXIT_NOT_CONVERGED
    }
}
