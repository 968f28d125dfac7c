//! Long-format `(series, t, value)` tables from the time series of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::output::{num, read_csv, RunManifest, PARTIAL_SUFFIX};

/// Time-indexed tables that are melted, in this order.
const SOURCES: [&str; 3] = ["timeseries.csv", "reduced.csv", "persisted.csv"];

/// Write `plotdata_<stem>.csv` next to every time-indexed table of the run
/// and return the paths written.
pub fn emit_plotdata(run_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let manifest = RunManifest::read(run_dir)
        .map_err(|_| CliError::MissingOutputs(format!("{}: no manifest", run_dir.display())))?;
    let mut written = Vec::new();
    for source in SOURCES {
        if manifest.file(source).is_none() {
            continue;
        }
        let path = run_dir.join(source);
        if !path.exists() {
            return Err(CliError::MissingOutputs(format!("{} listed but absent", path.display())));
        }
        let (header, rows) = read_csv(&path)?;
        if header.first().map(String::as_str) != Some("t") {
            continue;
        }
        let mut text = String::from("series,t,value\n");
        for (j, series) in header.iter().enumerate().skip(1) {
            for row in &rows {
                if row[j].is_finite() {
                    let _ = writeln!(text, "{series},{},{}", num(row[0]), num(row[j]));
                }
            }
        }
        if source == "reduced.csv" {
            // Overlay axis for plotting r against log t.
            for row in rows.iter().filter(|r| r[0] > 0.0) {
                let _ = writeln!(text, "log_t,{},{}", num(row[0]), num(row[0].ln()));
            }
        }
        let stem = source.trim_end_matches(".csv");
        let target = run_dir.join(format!("plotdata_{stem}.csv"));
        let partial = run_dir.join(format!("plotdata_{stem}.csv{PARTIAL_SUFFIX}"));
        fs::write(&partial, text).map_err(|e| CliError::io(&partial, e))?;
        fs::rename(&partial, &target).map_err(|e| CliError::io(&target, e))?;
        written.push(target);
    }
    if written.is_empty() {
        return Err(CliError::MissingOutputs(format!("{}: no time series", run_dir.display())));
    }
    Ok(written)
}
