//! End-to-end runs of the `spectrafuse` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spectrafuse::search::{read_grid_results, select_minmax, SearchResult};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectrafuse"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("SPECTRAFUSE_CACHE")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let line = String::from_utf8_lossy(&out.stderr)
        .lines()
        .last()
        .unwrap_or_default()
        .to_string();
    let v: serde_json::Value =
        serde_json::from_str(&line).unwrap_or_else(|_| panic!("not JSON: {line}"));
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

/// Small complete cohort written through the `synth` subcommand.
fn synth(dir: &Path, per_group: usize, replicates: u32) -> PathBuf {
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        serde_json::json!({
            "seed": 3,
            "n_breast": per_group,
            "n_colon": per_group,
            "n_control": per_group,
            "availability": "complete",
            "replicate_count": replicates,
            "effect_size": 1.0,
            "ftir": {"axis": {"lo": 650.0, "hi": 4000.0, "step": 50.0},
                     "peaks": [{"center": 1650.0, "width": 40.0, "amplitude": 1.0},
                               {"center": 1080.0, "width": 40.0, "amplitude": 0.4},
                               {"center": 2925.0, "width": 40.0, "amplitude": 0.4}],
                     "disease_peaks": [1], "baseline_poly": [0.1, 0.05], "ramp_amplitude": 0.0, "ramp_decay": 1000.0},
            "raman": {"axis": {"lo": 30.0, "hi": 3358.0, "step": 20.0},
                      "peaks": [{"center": 1004.0, "width": 15.0, "amplitude": 1.0},
                                {"center": 1450.0, "width": 20.0, "amplitude": 0.8}],
                      "disease_peaks": [0], "baseline_poly": [0.2], "ramp_amplitude": 5.0, "ramp_decay": 600.0},
            "eem": {"ex": {"lo": 250.0, "hi": 520.0, "step": 30.0}, "em": {"lo": 270.0, "hi": 750.0, "step": 30.0},
                    "fluorophores": [{"ex": 340.0, "em": 460.0, "width_ex": 30.0, "width_em": 40.0, "amplitude": 0.5}],
                    "disease_fluorophores": [0], "rayleigh_amplitude": 3.0, "rayleigh_support": 15.0, "blank_level": 0.05}
        })
        .to_string(),
    )
    .unwrap();
    let data = dir.join("data");
    let stdout = ok(&run(&[
        "synth",
        "--config",
        spec.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]));
    assert!(stdout.contains("dataset.json"));
    data.join("dataset.json")
}

fn experiment(dir: &Path, body: serde_json::Value) -> PathBuf {
    let path = dir.join("experiment.json");
    fs::write(&path, body.to_string()).unwrap();
    path
}

#[test]
fn validate_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 4, 3);
    let stdout = ok(&run(&["validate", manifest.to_str().unwrap()]));
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["modalities"]["FTIR"]["records"], 36);
    assert_eq!(v["modalities"]["FTIR"]["patients"], 12);
    assert_eq!(v["modalities"]["EEM"]["records"], 12);
}

#[test]
fn single_ftir_cell_runs_at_replicate_level() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 8, 3);
    let cfg = experiment(
        dir.path(),
        serde_json::json!({
            "dataset": manifest, "scenario": "breast", "modalities": ["FTIR"],
            "gbdt": {"n_rounds": 10}, "cv": {"k": 4, "seed": 1}, "learning_curve": [0.5, 1.0]
        }),
    );
    let out = dir.path().join("out");
    ok(&run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "1",
    ]));
    let cell = out.join("breast_ftir");
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cell.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["n"], 16);
    assert_eq!(metrics["n_rows"], 48);
    assert_eq!(metrics["k"], 4);
    assert_eq!(metrics["threshold"], 0.5);
    assert_eq!(metrics["auc"]["per_fold"].as_array().unwrap().len(), 4);
    assert_eq!(metrics["ftir_pipeline"]["replicate_mode"], "keep_all");

    let roc = fs::read_to_string(cell.join("roc_breast_ftir.csv")).unwrap();
    assert!(roc.starts_with("fold,fpr,tpr\n"));
    let lc = fs::read_to_string(cell.join("learning_curve.csv")).unwrap();
    assert_eq!(lc.lines().count(), 3);
    let pca = fs::read_to_string(cell.join("pca_ftir.csv")).unwrap();
    assert!(pca.starts_with("patient_id,group,pc1,pc2\n"));
    assert_eq!(pca.lines().count(), 17);
}

#[test]
fn threshold_flag_changes_operating_point_only() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 8, 1);
    let cfg = experiment(
        dir.path(),
        serde_json::json!({
            "dataset": manifest, "scenario": "colon", "modalities": ["Raman"],
            "gbdt": {"n_rounds": 10}, "cv": {"k": 4}, "learning_curve": [], "pca": false
        }),
    );
    let read = |t: &str| -> serde_json::Value {
        let out = dir.path().join(format!("out{t}"));
        ok(&run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threshold",
            t,
        ]));
        serde_json::from_str(&fs::read_to_string(out.join("colon_raman/metrics.json")).unwrap())
            .unwrap()
    };
    let a = read("0.5");
    let b = read("0.99");
    assert_eq!(a["auc"], b["auc"]);
    assert_eq!(b["threshold"], 0.99);
}

#[test]
fn suite_writes_fourteen_reports_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 8, 2);
    let cfg = experiment(
        dir.path(),
        serde_json::json!({
            "dataset": manifest, "suite": true, "gbdt": {"n_rounds": 5, "max_depth": 3},
            "cv": {"k": 3, "seed": 5}, "learning_curve": [0.5, 1.0]
        }),
    );
    let out = dir.path().join("suite");
    let stdout = ok(&run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(stdout.lines().count(), 14);
    let dirs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    assert_eq!(dirs.len(), 14);
    let tri: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join("breast_ftir_raman_eem/metrics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(tri["n"], 16);
    assert_eq!(tri["n_rows"], 16);

    ok(&run(&["plots", out.to_str().unwrap()]));
    for scenario in ["breast", "colon"] {
        let svg = fs::read_to_string(out.join(format!("roc_{scenario}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches(r#"class="mean""#).count(), 7);
        assert_eq!(svg.matches(r#"class="band""#).count(), 7);
    }
    let pca = fs::read_to_string(out.join("colon_eem/pca_eem.svg")).unwrap();
    let pc1 = pca.split("PC1 (").nth(1).unwrap();
    assert!(pc1.split(')').next().unwrap().ends_with('%'));
    assert!(pca.contains("PC2 ("));
    assert!(out.join("breast_ftir/learning_curve.svg").is_file());
}

#[test]
fn failures_exit_nonzero_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(
        error_kind(&run(&["plots", empty.to_str().unwrap()])),
        "missing_report"
    );

    let cfg = experiment(
        dir.path(),
        serde_json::json!({"dataset": "nowhere.json", "scenario": "breast", "modalities": ["FTIR"]}),
    );
    assert_eq!(
        error_kind(&run(&["run", "--config", cfg.to_str().unwrap()])),
        "io"
    );

    let bad = experiment(
        dir.path(),
        serde_json::json!({"dataset": "d.json", "suite": true, "cv": {"k": 1}}),
    );
    assert_eq!(
        error_kind(&run(&["run", "--config", bad.to_str().unwrap()])),
        "invalid_parameter"
    );

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{").unwrap();
    assert_eq!(
        error_kind(&run(&["synth", "--config", garbage.to_str().unwrap()])),
        "json"
    );
}

#[test]
fn grid_search_covers_every_pipeline_and_resumes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 5, 2);
    let cfg = experiment(
        dir.path(),
        serde_json::json!({
            "dataset": manifest, "suite": true, "gbdt": {"n_rounds": 3, "max_depth": 2}, "cv": {"k": 2, "seed": 4}
        }),
    );
    let out = dir.path().join("search");
    let cache = dir.path().join("cache");
    let search = || {
        let o = bin()
            .args([
                "grid-search",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("SPECTRAFUSE_CACHE", &cache)
            .output()
            .unwrap();
        let text = ok(&o);
        serde_json::from_str::<serde_json::Value>(text.trim()).unwrap()
    };
    let first = search();
    assert_eq!(first["candidates"], 2880);
    assert_eq!(first["evaluated"], 2880);
    assert!(cache.read_dir().unwrap().count() >= 2880);

    let rows = read_grid_results(&out.join("grid_results.csv")).unwrap();
    assert_eq!(rows.len(), 2880);
    let winner: SearchResult =
        serde_json::from_str(&fs::read_to_string(out.join("winner.json")).unwrap()).unwrap();
    let offline = select_minmax(&rows).unwrap();
    assert_eq!(offline.index, winner.index);
    assert_eq!(offline.config, winner.config);

    let grid_before = fs::read(out.join("grid_results.csv")).unwrap();
    let second = search();
    assert_eq!(second["evaluated"], 0);
    assert_eq!(second["cached"], 2880);
    assert_eq!(fs::read(out.join("grid_results.csv")).unwrap(), grid_before);
}
