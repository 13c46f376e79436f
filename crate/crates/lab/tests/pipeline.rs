use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ddlab::config::{ExperimentConfig, ExperimentId};
use ddlab::manifest::{RunManifest, RunStatus, MANIFEST_FILE};
use ddlab::report::{read_verdicts, TIMESERIES_FILE, VERDICTS_FILE};
use ddlab::{report, run, LabError};

fn small_kdv(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::resolve(
        None,
        Some(ExperimentId::PolyDecayKdv),
        &["energy.enabled=false".into(), "grid.points=[256]".into(), "solver.dt=0.01".into()],
    )
    .unwrap();
    cfg.output = Some(dir.to_path_buf());
    cfg
}

fn timeseries(dir: &Path) -> Vec<(f64, String, String, f64)> {
    let mut rdr = csv::Reader::from_path(dir.join(TIMESERIES_FILE)).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].to_string(), r[2].to_string(), r[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn cutoff_violation_is_reported_with_every_other_violation() {
    let err = ExperimentConfig::resolve(
        None,
        Some(ExperimentId::PolyDecayZk),
        &["weights.eps=1".into(), "weights.tau=4".into(), "solver.dt=-0.1".into()],
    )
    .unwrap()
    .validate()
    .unwrap_err();
    let LabError::Validation(list) = &err else { panic!("expected a validation error, got {err}") };
    assert!(list.len() >= 2, "{list:?}");
    assert!(list.iter().any(|v| v.contains("tau >= 5 eps")), "{list:?}");
    assert!(list.iter().any(|v| v.contains("dt")), "{list:?}");
    assert!(err.to_string().contains("tau >= 5 eps"));
}

#[test]
fn validation_happens_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_kdv(&tmp.path().join("run"));
    cfg.weights.tau = 4.0 * cfg.weights.eps;
    assert!(matches!(run(&cfg), Err(LabError::Validation(_))));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&small_kdv(&a)).unwrap();
    run(&small_kdv(&b)).unwrap();
    for file in [TIMESERIES_FILE, VERDICTS_FILE] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let (ma, mb) = (RunManifest::load(&a).unwrap(), RunManifest::load(&b).unwrap());
    let hashes = |m: &RunManifest| m.snapshots.iter().map(|s| s.sha256.clone()).collect::<Vec<_>>();
    assert_eq!(hashes(&ma), hashes(&mb));
    assert_eq!(ma.metrics, mb.metrics);
}

#[test]
fn gain_scan_has_one_row_per_time_and_s() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_kdv(tmp.path());
    run(&cfg).unwrap();
    let rows = timeseries(tmp.path());
    let s_grid = cfg.weights.s_grid();
    let mut per_s = Vec::new();
    for s in &s_grid {
        let q = format!("gain_s={s}");
        let times: Vec<f64> = rows.iter().filter(|r| r.1 == q).map(|r| r.0).collect();
        assert!(!times.is_empty(), "no rows for {q}");
        assert!(times.iter().all(|t| *t >= cfg.weights.delta - 1e-12));
        assert!(times.windows(2).all(|w| w[0] < w[1]), "{q}: times not strictly increasing");
        per_s.push(times);
    }
    assert!(per_s.windows(2).all(|w| w[0] == w[1]), "every s shares the same time grid");
}

#[test]
fn csv_values_round_trip_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    run(&small_kdv(tmp.path())).unwrap();
    let manifest = RunManifest::load(tmp.path()).unwrap();
    let diag = report::load_diagnostics(tmp.path(), &manifest).unwrap();
    let rows = timeseries(tmp.path());
    assert_eq!(rows.len(), diag.rows.len());
    for (csv_row, r) in rows.iter().zip(&diag.rows) {
        assert_eq!(csv_row.0, r.t);
        assert_eq!(csv_row.3, r.value);
        assert_eq!((csv_row.1.as_str(), csv_row.2.as_str()), (r.quantity_id.as_str(), r.region_id.as_str()));
    }
}

#[test]
fn verdicts_json_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    run(&small_kdv(tmp.path())).unwrap();
    let path = tmp.path().join(VERDICTS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let verdicts = read_verdicts(&path).unwrap();
    assert!(!verdicts.is_empty());
    assert_eq!(serde_json::to_string_pretty(&verdicts).unwrap(), text);
    let manifest = RunManifest::load(tmp.path()).unwrap();
    assert_eq!(report::load_diagnostics(tmp.path(), &manifest).unwrap().verdicts, verdicts);
}

#[test]
fn report_refuses_damaged_run_directories() {
    let tmp = tempfile::tempdir().unwrap();
    run(&small_kdv(tmp.path())).unwrap();
    let manifest_path = tmp.path().join(MANIFEST_FILE);
    let original = fs::read_to_string(&manifest_path).unwrap();
    let mut manifest: RunManifest = serde_json::from_str(&original).unwrap();

    let first = tmp.path().join(&manifest.snapshots[0].file);
    let bytes = fs::read(&first).unwrap();
    let mut corrupt = bytes.clone();
    *corrupt.last_mut().unwrap() ^= 1;
    fs::write(&first, &corrupt).unwrap();
    assert!(matches!(report(tmp.path()), Err(LabError::ChecksumMismatch { .. })));

    fs::remove_file(&first).unwrap();
    assert!(matches!(report(tmp.path()), Err(LabError::MissingSnapshot(_))));
    fs::write(&first, &bytes).unwrap();
    report(tmp.path()).unwrap();

    manifest.snapshots.clear();
    fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    assert!(matches!(report(tmp.path()), Err(LabError::EmptySnapshotIndex)));
}

#[test]
fn blowup_writes_partial_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_kdv(tmp.path());
    cfg.data.amplitude = 1e4;
    cfg.solver.dt = 0.05;
    cfg.validate().unwrap();
    let err = run(&cfg).unwrap_err();
    let LabError::Aborted { t, manifest } = err else { panic!("expected an abort, got {err}") };
    assert_eq!(manifest, tmp.path().join(MANIFEST_FILE));
    let m = RunManifest::load(tmp.path()).unwrap();
    assert_eq!(m.status, RunStatus::Aborted);
    assert_eq!(m.aborted_at, Some(t));
    assert!(!m.verdicts.all_passed);
    assert!(!m.snapshots.is_empty());
    for s in &m.snapshots {
        assert!(s.t <= t);
        assert!(tmp.path().join(&s.file).exists());
    }
}

#[test]
fn soliton_manifest_carries_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::resolve(
        None,
        Some(ExperimentId::SolitonValidate),
        &[
            "grid.points=[128]".into(),
            "soliton.scaling_grid.points=[128]".into(),
            "soliton.kdv_grid.points=[512]".into(),
            "soliton.zk_t_end=0.1".into(),
            "soliton.kdv_t_end=0.2".into(),
        ],
    )
    .unwrap();
    cfg.output = Some(tmp.path().to_path_buf());
    let (manifest, _) = run(&cfg).unwrap();
    for key in [
        "ground_state_residual",
        "ground_state_decay_rate",
        "scaling_error",
        "kdv_tracking_error",
        "kdv_l2_drift",
        "zk_tracking_error",
        "zk_l2_drift",
    ] {
        let v = manifest.metrics.get(key).unwrap_or_else(|| panic!("missing {key}"));
        assert!(v.is_finite(), "{key} = {v}");
    }
    assert_eq!(manifest.status, RunStatus::Complete);
    assert!(manifest.snapshots.iter().any(|s| s.label == "ground_state"));
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_match_presets() {
    for id in ExperimentId::ALL {
        let path = configs_dir().join(format!("{id}.toml"));
        let cfg = ExperimentConfig::load(&path, None, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(cfg, ExperimentConfig::preset(id), "{}", path.display());
    }
}

#[test]
fn cli_prints_config_and_reports_exit_status() {
    let bin = env!("CARGO_BIN_EXE_ddlab");
    let out = Command::new(bin).args(["run", "-e", "linear-growth", "--print-config"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = ExperimentConfig::resolve(Some(&text), None, &[]).unwrap();
    assert_eq!(cfg, ExperimentConfig::preset(ExperimentId::LinearGrowth));

    let out = Command::new(bin).args(["run", "-e", "poly-decay-zk", "--set", "weights.tau=4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau >= 5 eps"));

    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["run", "-e", "weights-suite", "-o"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join(TIMESERIES_FILE).exists() || tmp.path().join(VERDICTS_FILE).exists());

    let out = Command::new(bin).args(["psido-test", "--points", "8"]).output().unwrap();
    assert!(out.status.success());
}
