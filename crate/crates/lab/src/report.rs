//! Renders a finished run directory: `timeseries.csv`, `verdicts.json` and
//! gnuplot data under `plots/`.
//!
//! Every snapshot in the manifest is re-hashed first, so a report is never
//! produced from a directory whose snapshots were altered or lost.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ddlab_core::diagnostics::{DiagnosticsReport, Verdict};

use crate::manifest::{sha256_hex, RunManifest};
use crate::LabError;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const VERDICTS_FILE: &str = "verdicts.json";
pub const PLOT_DIR: &str = "plots";

/// Paths written by [`report`].
#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub timeseries: PathBuf,
    pub verdicts: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn verify_snapshots(run_dir: &Path, manifest: &RunManifest) -> Result<(), LabError> {
    if manifest.snapshots.is_empty() {
        return Err(LabError::EmptySnapshotIndex);
    }
    for s in &manifest.snapshots {
        let path = run_dir.join(&s.file);
        let bytes = fs::read(&path).map_err(|_| LabError::MissingSnapshot(s.file.clone()))?;
        let actual = sha256_hex(&bytes);
        if actual != s.sha256 {
            return Err(LabError::ChecksumMismatch { file: s.file.clone(), expected: s.sha256.clone(), actual });
        }
    }
    Ok(())
}

pub fn load_diagnostics(run_dir: &Path, manifest: &RunManifest) -> Result<DiagnosticsReport, LabError> {
    let path = run_dir.join(&manifest.diagnostics);
    let text = fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))
}

pub fn write_timeseries(path: &Path, report: &DiagnosticsReport) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| LabError::io(path, e))?;
    let err = |e: csv::Error| LabError::io(path, e);
    w.write_record(["t", "quantity_id", "region_id", "value"]).map_err(err)?;
    for r in &report.rows {
        w.write_record([format!("{:.16e}", r.t), r.quantity_id.clone(), r.region_id.clone(), format!("{:.16e}", r.value)])
            .map_err(err)?;
    }
    w.flush().map_err(|e| LabError::io(path, e))
}

pub fn read_verdicts(path: &Path) -> Result<Vec<Verdict>, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))
}

/// File-name-safe form of a quantity or region id.
fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

fn write_plots(dir: &Path, report: &DiagnosticsReport) -> Result<Vec<PathBuf>, LabError> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut series: BTreeMap<(&str, &str), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &report.rows {
        series.entry((&r.quantity_id, &r.region_id)).or_default().push((r.t, r.value));
    }
    let mut files = Vec::new();
    let mut script = String::from("set logscale y\nset xlabel 't'\n");
    for ((q, region), points) in &series {
        let name = format!("{}__{}.dat", slug(q), slug(region));
        let mut body = format!("# {q} on {region}\n# t value\n");
        for (t, v) in points {
            writeln!(body, "{t:.16e} {v:.16e}").expect("writing to a String");
        }
        let path = dir.join(&name);
        fs::write(&path, body).map_err(|e| LabError::io(&path, e))?;
        let png = name.trim_end_matches(".dat");
        writeln!(script, "set output '{png}.png'\nset terminal pngcairo\nplot '{name}' using 1:2 with lines title '{q}'")
            .expect("writing to a String");
        files.push(path);
    }
    let gp = dir.join("plot.gp");
    fs::write(&gp, script).map_err(|e| LabError::io(&gp, e))?;
    files.push(gp);
    Ok(files)
}

/// Check snapshot integrity, then write the CSV, verdict JSON and plot data.
pub fn report(run_dir: &Path) -> Result<ReportFiles, LabError> {
    let manifest = RunManifest::load(run_dir)?;
    verify_snapshots(run_dir, &manifest)?;
    let diagnostics = load_diagnostics(run_dir, &manifest)?;
    let timeseries = run_dir.join(TIMESERIES_FILE);
    write_timeseries(&timeseries, &diagnostics)?;
    let verdicts = run_dir.join(VERDICTS_FILE);
    let text = serde_json::to_string_pretty(&diagnostics.verdicts).map_err(|e| LabError::Format(e.to_string()))?;
    fs::write(&verdicts, text).map_err(|e| LabError::io(&verdicts, e))?;
    let plots = write_plots(&run_dir.join(PLOT_DIR), &diagnostics)?;
    Ok(ReportFiles { timeseries, verdicts, plots })
}
