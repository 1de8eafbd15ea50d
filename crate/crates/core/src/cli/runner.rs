//! Executes experiment cells and writes their report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{dataset_hash, load_dataset, Modality, Scenario};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, learning_curve, pca_project, CvReport, LearningPoint, MetricsSummary,
};
use crate::experiment::{build_input, preprocess, PatientFeatures, Tables};
use crate::fusion::collapse_replicates_for_fusion;
use crate::prep1d::{OperatorParams, PipelineConfig};

use super::config::{configuration_name, Cell, ExperimentConfig};

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub scenario: Scenario,
    pub configuration: String,
    pub modalities: Vec<Modality>,
    pub dataset_hash: String,
    pub ftir_pipeline: Option<PipelineConfig>,
    #[serde(flatten)]
    pub summary: MetricsSummary,
    /// Explained variance ratios of the first two components per modality.
    pub pca_explained_variance: BTreeMap<Modality, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: Cell,
    pub dir: PathBuf,
    pub result: std::result::Result<CellMetrics, String>,
}

/// Loads the dataset, preprocesses each modality once and runs every cell.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out: &Path,
    threshold: f64,
) -> Result<Vec<CellOutcome>> {
    let tables = load_dataset(&cfg.dataset)?;
    run_on_tables(cfg, &tables, out, threshold)
}

pub fn run_on_tables(
    cfg: &ExperimentConfig,
    tables: &Tables,
    out: &Path,
    threshold: f64,
) -> Result<Vec<CellOutcome>> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let hash = dataset_hash(tables);
    let features = preprocess(
        tables,
        &cfg.required_modalities(),
        &cfg.ftir,
        &OperatorParams::default(),
    )?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outcomes = cfg
        .cells()
        .into_par_iter()
        .map(|cell| {
            let dir = out.join(cell.name());
            let result = run_cell(cfg, &cell, &features, &hash, &dir, threshold).map_err(|e| {
                let _ = write_error(&dir, &e);
                e.to_string()
            });
            CellOutcome { cell, dir, result }
        })
        .collect();
    Ok(outcomes)
}

/// Machine-readable error payload.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

fn write_error(dir: &Path, e: &Error) -> Result<()> {
    fs::create_dir_all(dir).map_err(|err| Error::io(dir, err))?;
    let path = dir.join("error.json");
    fs::write(&path, error_json(e)).map_err(|err| Error::io(&path, err))
}

fn run_cell(
    cfg: &ExperimentConfig,
    cell: &Cell,
    features: &BTreeMap<Modality, PatientFeatures>,
    hash: &str,
    dir: &Path,
    threshold: f64,
) -> Result<CellMetrics> {
    let input = build_input(features, cell.scenario, &cell.modalities)?;
    let cv = cfg.cv_settings(threshold);
    let report = cross_validate(&input, &cfg.gbdt, &cv)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config = configuration_name(&cell.modalities);
    write_roc(
        &dir.join(format!("roc_{}_{config}.csv", cell.scenario.name())),
        &report,
    )?;
    if !cfg.learning_curve.is_empty() {
        let points = learning_curve(&input, &cfg.learning_curve, &cfg.gbdt, &cv)?;
        write_learning_curve(&dir.join("learning_curve.csv"), &points)?;
    }
    let mut pca_explained_variance = BTreeMap::new();
    if cfg.pca {
        for &m in &cell.modalities {
            let ratios = write_pca(
                &dir.join(format!("pca_{}.csv", m.name().to_lowercase())),
                &features[&m],
                cell.scenario,
            )?;
            pca_explained_variance.insert(m, ratios);
        }
    }
    let metrics = CellMetrics {
        scenario: cell.scenario,
        configuration: config,
        modalities: cell.modalities.clone(),
        dataset_hash: hash.to_string(),
        ftir_pipeline: cell
            .modalities
            .contains(&Modality::Ftir)
            .then_some(cfg.ftir),
        summary: report.summary,
        pca_explained_variance,
    };
    let path = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(&metrics).map_err(|e| Error::json(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(metrics)
}

/// Columns: fold, fpr, tpr.
fn write_roc(path: &Path, report: &CvReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["fold", "fpr", "tpr"])
        .map_err(|e| Error::csv(path, e))?;
    for f in &report.folds {
        for (fpr, tpr) in &f.roc {
            w.write_record([f.fold.to_string(), fpr.to_string(), tpr.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns: fraction, mean_train_rows, auc_mean, auc_std.
fn write_learning_curve(path: &Path, points: &[LearningPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["fraction", "mean_train_rows", "auc_mean", "auc_std"])
        .map_err(|e| Error::csv(path, e))?;
    for p in points {
        w.write_record([
            p.fraction.to_string(),
            p.mean_train_rows.to_string(),
            p.auc_mean.to_string(),
            p.auc_std.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns: patient_id, group, pc1, pc2. One row per patient of the
/// scenario, replicates averaged. Returns the explained variance ratios.
fn write_pca(path: &Path, f: &PatientFeatures, scenario: Scenario) -> Result<Vec<f64>> {
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (pid, vectors) in &f.vectors {
        if scenario.includes(f.groups[pid]) {
            ids.push(pid);
            rows.push(collapse_replicates_for_fusion(vectors)?);
        }
    }
    let p = pca_project(&rows, 2.min(f.width()).min(rows.len()))?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["patient_id", "group", "pc1", "pc2"])
        .map_err(|e| Error::csv(path, e))?;
    for (pid, s) in ids.iter().zip(&p.scores) {
        let pc2 = s.get(1).copied().unwrap_or(0.0);
        w.write_record([
            pid.to_string(),
            f.groups[*pid].name().to_string(),
            s[0].to_string(),
            pc2.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(p.explained_variance_ratio)
}
