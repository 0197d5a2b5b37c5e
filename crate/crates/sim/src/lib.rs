//! Sweep harness for the CPDM 8-QAM link simulator: configuration, built-in
//! experiment presets, parallel execution and CSV / manifest output.

pub mod config;
pub mod engine;
pub mod run;
pub mod scenario;

use std::path::Path;

pub use config::{
    parse, resolve, validate_config, Axis, ConfigError, ExperimentSpec, ResolvedSweep,
};
pub use engine::{Row, Status, COLUMNS};
pub use run::{run_experiment, run_points, RunManifest, RunOptions, RunOutcome};
pub use scenario::{describe_stage, list_presets, Scenario, Task};

/// Reads a TOML config, or a run manifest (`.json`) to repeat a run.
pub fn load_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        key: path.display().to_string(),
        message: e.to_string(),
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| ConfigError {
            key: path.display().to_string(),
            message: format!("not a run manifest: {e}"),
        })?;
        return Ok(m.config);
    }
    parse(&text)
}
