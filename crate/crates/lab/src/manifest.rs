//! Run directories and their manifests.
//!
//! Layout of a run directory:
//!
//! ```text
//! manifest.json       RunManifest
//! diagnostics.json    DiagnosticsReport
//! snapshots/NNNNN.ddl one file per snapshot, indexed in the manifest
//! timeseries.csv      written by the report step
//! verdicts.json
//! plots/
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ddlab_core::diagnostics::DiagnosticsReport;
use ddlab_core::spectral::write_snapshot;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiments::{execute, Outcome};
use crate::{report, ExperimentId, LabError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
/// Root for run directories when the configuration names none.
pub const OUTPUT_ENV: &str = "DDLAB_OUTPUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Complete,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub t: f64,
    pub label: String,
    /// Path relative to the run directory.
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub entries: usize,
    pub passed: usize,
    pub failed: usize,
    pub informational: usize,
    pub all_passed: bool,
}

impl VerdictSummary {
    pub fn of(report: &DiagnosticsReport) -> VerdictSummary {
        let asserted = report.verdicts.iter().filter(|v| !v.informational);
        let passed = asserted.clone().filter(|v| v.passed).count();
        let failed = asserted.count() - passed;
        VerdictSummary {
            entries: report.verdicts.len(),
            passed,
            failed,
            informational: report.verdicts.iter().filter(|v| v.informational).count(),
            all_passed: report.all_passed(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentId,
    pub status: RunStatus,
    pub aborted_at: Option<f64>,
    pub config: ExperimentConfig,
    pub snapshots: Vec<SnapshotEntry>,
    pub wall_clock_seconds: f64,
    pub verdicts: VerdictSummary,
    pub metrics: BTreeMap<String, f64>,
    pub diagnostics: String,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<RunManifest, LabError> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))
    }
}

/// Directory for a run: the configured output, else `$DDLAB_OUTPUT/<id>`,
/// else `runs/<id>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match &cfg.output {
        Some(p) => p.clone(),
        None => {
            let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
            root.join(cfg.experiment.as_str())
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), LabError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Format(e.to_string()))?;
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

fn write_outcome(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome, seconds: f64) -> Result<RunManifest, LabError> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(|e| LabError::io(&snap_dir, e))?;
    let mut entries = Vec::with_capacity(outcome.snapshots.len());
    for (index, s) in outcome.snapshots.iter().enumerate() {
        let file = format!("{SNAPSHOT_DIR}/{index:05}.ddl");
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &s.field)?;
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| LabError::io(&path, e))?;
        entries.push(SnapshotEntry { index, t: s.t, label: s.label.clone(), file, sha256: sha256_hex(&bytes) });
    }
    write_json(&dir.join(DIAGNOSTICS_FILE), &outcome.report)?;
    let manifest = RunManifest {
        experiment: cfg.experiment,
        status: if outcome.aborted_at.is_some() { RunStatus::Aborted } else { RunStatus::Complete },
        aborted_at: outcome.aborted_at,
        config: cfg.clone(),
        snapshots: entries,
        wall_clock_seconds: seconds,
        verdicts: VerdictSummary::of(&outcome.report),
        metrics: outcome.report.fitted.clone(),
        diagnostics: DIAGNOSTICS_FILE.into(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Validate, execute and persist one experiment, then render its report.
///
/// A run that hits a non-finite state still writes everything gathered up to
/// that point, marks the manifest as aborted and returns
/// [`LabError::Aborted`].
pub fn run(cfg: &ExperimentConfig) -> Result<(RunManifest, PathBuf), LabError> {
    cfg.validate()?;
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let start = Instant::now();
    let outcome = execute(cfg)?;
    let manifest = write_outcome(&dir, cfg, &outcome, start.elapsed().as_secs_f64())?;
    if let Some(t) = outcome.aborted_at {
        return Err(LabError::Aborted { t, manifest: dir.join(MANIFEST_FILE) });
    }
    report(&dir)?;
    Ok((manifest, dir))
}
