//! Report assembly: a `run` section that is byte-reproducible for identical
//! config + seed + version, with wall-clock timings kept outside it.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::commands::CommandOutcome;

pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

pub struct WrittenReport {
    pub report_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

/// Writes report.json and the CSV traces into `out_dir` (created if needed).
pub fn write_report(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config_sha256: &str,
    outcome: &CommandOutcome,
    timings_ms: &[(&str, u128)],
) -> io::Result<WrittenReport> {
    fs::create_dir_all(out_dir)?;
    let run = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config_sha256": config_sha256,
        "pass": outcome.pass,
        "warnings": outcome.warnings,
        "result": outcome.result,
    });
    let timings: Value = timings_ms
        .iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect::<serde_json::Map<String, Value>>()
        .into();
    let doc = json!({
        "run": run,
        "timings_ms": timings,
    });
    let report_path = out_dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&doc)? + "\n")?;
    let mut trace_paths = Vec::new();
    for (name, contents) in &outcome.traces {
        let p = out_dir.join(name);
        fs::write(&p, contents)?;
        trace_paths.push(p);
    }
    Ok(WrittenReport { report_path, trace_paths })
}
