//! Configuration-driven experiment runner for `dampkg`.
//!
//! Every run writes into its own directory: CSV/JSON outputs, a
//! `summary.json` and finally `manifest.json` with SHA-256 hashes of all
//! files. Until the manifest is written, outputs carry a `.partial` suffix.

pub mod config;
pub mod error;
pub mod output;
pub mod plotdata;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

pub use config::{RunConfig, Scenario, SweepConfig};
pub use error::CliError;
pub use output::RunManifest;
pub use plotdata::emit_plotdata;
pub use scenarios::run;

/// Parse a run configuration. A missing `scenario` field is filled with
/// `default_scenario`; a different one is rejected.
pub fn parse_config(text: &str, default_scenario: Option<Scenario>) -> Result<RunConfig, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
    if let Some(s) = default_scenario {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::ConfigInvalid("configuration must be a JSON object".into()))?;
        let want = json!(scenarios::scenario_name(s));
        match obj.get("scenario") {
            None => {
                obj.insert("scenario".into(), want);
            }
            Some(got) if *got == want => {}
            Some(got) => {
                return Err(CliError::ConfigInvalid(format!("scenario {got} given to the {want} subcommand")))
            }
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::ConfigInvalid(e.to_string()))
}

pub fn load_config(path: &Path, default_scenario: Option<Scenario>) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    parse_config(&text, default_scenario)
}

/// Output directory: explicit override, then the configuration, then
/// `runs/<scenario>`.
pub fn resolve_output_dir(config: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(scenarios::scenario_name(config.scenario)))
}

/// Outcome of one run of a sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepEntry {
    pub index: usize,
    pub dir: PathBuf,
    pub ok: bool,
    pub exit_code: i32,
    pub message: Option<String>,
}

/// Run all configurations of a sweep, each into `base/run_<index>_<scenario>`,
/// on the current rayon pool. Writes `sweep.json` into `base`.
pub fn run_sweep(sweep: &SweepConfig, base: &Path) -> Result<Vec<SweepEntry>, CliError> {
    for config in &sweep.runs {
        scenarios::validate(config)?;
    }
    fs::create_dir_all(base).map_err(|e| CliError::io(base, e))?;
    let entries: Vec<SweepEntry> = sweep
        .runs
        .par_iter()
        .enumerate()
        .map(|(index, config)| {
            let dir = base.join(format!("run_{index:03}_{}", scenarios::scenario_name(config.scenario)));
            match run(config, &dir) {
                Ok(_) => SweepEntry { index, dir, ok: true, exit_code: 0, message: None },
                Err(e) => SweepEntry { index, dir, ok: false, exit_code: e.exit_code(), message: Some(e.to_string()) },
            }
        })
        .collect();
    let path = base.join("sweep.json");
    let text = serde_json::to_string_pretty(&entries).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(entries)
}
