//! Atomic CSV and JSON emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{toml_to_json, Resolved};
use crate::experiments::Report;
use crate::CliError;

/// CSV text with the config-hash comment line in front.
pub fn csv_with_hash(hash: &str, body: &str) -> String {
    format!("# config_hash={hash}\n{body}")
}

fn persist(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.flush().map_err(io)?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| io(e.error))?;
    Ok(path)
}

/// Writes `<experiment>.csv` and `<experiment>.json` into the output
/// directory. Both texts are built first, and each file appears only once
/// complete.
pub fn write_report(r: &Resolved, report: &Report) -> Result<Vec<PathBuf>, CliError> {
    let dir = &r.settings.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let hash = r.hash();
    let name = r.experiment.name();
    let csv = csv_with_hash(&hash, &report.csv);
    let summary = json!({
        "experiment": name,
        "config_hash": hash,
        "seed": r.settings.seed,
        "params": toml_to_json(&toml::Value::Table(r.table.clone())),
        "results": report.summary,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    Ok(vec![
        persist(dir, &format!("{name}.csv"), &csv)?,
        persist(dir, &format!("{name}.json"), &text)?,
    ])
}
