//! Cross-validation driver: fold-local scaling, training and scoring.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FoldScaling, ModalityBlock};
use crate::gbdt::{predict_proba, train, GbdtParams};

use super::folds::{stratified_group_kfold, FoldAssignment};
use super::metrics::{interpolate_tpr, mean_std, roc_auc, roc_curve, threshold_metrics};

/// Points on the shared FPR grid used for the mean ROC curve.
pub const ROC_GRID_POINTS: usize = 101;

/// Unscaled per-modality blocks with row labels and patient groups.
#[derive(Debug, Clone, PartialEq)]
pub struct CvInput {
    pub blocks: Vec<ModalityBlock>,
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
}

impl CvInput {
    pub fn new(blocks: Vec<ModalityBlock>, labels: Vec<u8>, groups: Vec<String>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Empty("no feature blocks".into()));
        }
        if labels.len() != groups.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: groups.len(),
            });
        }
        for b in &blocks {
            if b.row_ids != groups {
                return Err(Error::InvalidParameter(format!(
                    "{} block rows are not aligned with the group vector",
                    b.modality
                )));
            }
        }
        Ok(Self {
            blocks,
            labels,
            groups,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Distinct patients per class: (total, cancer, control).
    pub fn patient_counts(&self) -> (usize, usize, usize) {
        let mut by_group: BTreeMap<&str, u8> = BTreeMap::new();
        for (g, &y) in self.groups.iter().zip(&self.labels) {
            by_group.insert(g, y);
        }
        let cancer = by_group.values().filter(|&&y| y == 1).count();
        (by_group.len(), cancer, by_group.len() - cancer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
    pub per_fold: Vec<f64>,
}

impl MetricStat {
    fn from_folds(per_fold: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_fold);
        Self {
            mean,
            std,
            per_fold,
        }
    }
}

/// Aggregated cross-validation metrics, serialized as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub n_cancer: usize,
    pub n_control: usize,
    pub n_rows: usize,
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
    pub auc: MetricStat,
    pub sensitivity: MetricStat,
    pub specificity: MetricStat,
    pub balanced_accuracy: MetricStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
    pub roc: Vec<(f64, f64)>,
}

/// Vertically averaged ROC curve on a fixed FPR grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRoc {
    pub fpr: Vec<f64>,
    pub tpr_mean: Vec<f64>,
    pub tpr_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub summary: MetricsSummary,
    pub folds: Vec<FoldReport>,
    pub mean_roc: MeanRoc,
    pub assignment: FoldAssignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSettings {
    pub k: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 42,
            threshold: 0.5,
        }
    }
}

fn retry_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

fn has_both_classes(rows: &[usize], labels: &[u8]) -> bool {
    let pos = rows.iter().filter(|&&r| labels[r] == 1).count();
    pos > 0 && pos < rows.len()
}

fn first_degenerate_fold(a: &FoldAssignment, labels: &[u8]) -> Option<usize> {
    (0..a.k).find(|&f| {
        let (train, test) = a.split(f);
        !has_both_classes(&train, labels) || !has_both_classes(&test, labels)
    })
}

/// Fold assignment with one re-seeded retry if any fold lacks a class in
/// its training or test part.
pub fn assign_folds(
    labels: &[u8],
    groups: &[String],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    let a = stratified_group_kfold(labels, groups, k, seed)?;
    let Some(_) = first_degenerate_fold(&a, labels) else {
        return Ok(a);
    };
    let b = stratified_group_kfold(labels, groups, k, retry_seed(seed))?;
    match first_degenerate_fold(&b, labels) {
        None => Ok(b),
        Some(f) => Err(Error::DegenerateFold(format!(
            "fold {f} has a single class after re-seeding"
        ))),
    }
}

/// Fits scalers and the classifier on `train` only, then scores `test`.
pub fn fit_and_score(
    input: &CvInput,
    train_rows: &[usize],
    test_rows: &[usize],
    params: &GbdtParams,
) -> Result<Vec<f64>> {
    let scaling = FoldScaling::fit(&input.blocks, train_rows)?;
    let x_train = scaling.transform(&input.blocks, train_rows, &input.labels)?;
    let model = train(&x_train, &x_train.labels, params)?;
    let x_test = scaling.transform(&input.blocks, test_rows, &input.labels)?;
    predict_proba(&model, &x_test)
}

pub fn cross_validate(input: &CvInput, params: &GbdtParams, cv: &CvSettings) -> Result<CvReport> {
    let assignment = assign_folds(&input.labels, &input.groups, cv.k, cv.seed)?;
    let folds = (0..cv.k)
        .into_par_iter()
        .map(|fold| {
            let (train_rows, test_rows) = assignment.split(fold);
            let scores = fit_and_score(input, &train_rows, &test_rows, params)?;
            let y: Vec<u8> = test_rows.iter().map(|&r| input.labels[r]).collect();
            let t = threshold_metrics(&scores, &y, cv.threshold)?;
            Ok(FoldReport {
                fold,
                n_train: train_rows.len(),
                n_test: test_rows.len(),
                auc: roc_auc(&scores, &y)?,
                sensitivity: t.sensitivity,
                specificity: t.specificity,
                balanced_accuracy: t.balanced_accuracy,
                roc: roc_curve(&scores, &y)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (n, n_cancer, n_control) = input.patient_counts();
    let collect = |f: fn(&FoldReport) -> f64| MetricStat::from_folds(folds.iter().map(f).collect());
    let summary = MetricsSummary {
        n,
        n_cancer,
        n_control,
        n_rows: input.n_rows(),
        k: cv.k,
        seed: cv.seed,
        threshold: cv.threshold,
        auc: collect(|f| f.auc),
        sensitivity: collect(|f| f.sensitivity),
        specificity: collect(|f| f.specificity),
        balanced_accuracy: collect(|f| f.balanced_accuracy),
    };
    let mean_roc = mean_roc(&folds);
    Ok(CvReport {
        summary,
        folds,
        mean_roc,
        assignment,
    })
}

fn mean_roc(folds: &[FoldReport]) -> MeanRoc {
    let fpr: Vec<f64> = (0..ROC_GRID_POINTS)
        .map(|i| i as f64 / (ROC_GRID_POINTS - 1) as f64)
        .collect();
    let mut tpr_mean = Vec::with_capacity(fpr.len());
    let mut tpr_std = Vec::with_capacity(fpr.len());
    for &f in &fpr {
        let at: Vec<f64> = folds.iter().map(|r| interpolate_tpr(&r.roc, f)).collect();
        let (m, s) = mean_std(&at);
        tpr_mean.push(m);
        tpr_std.push(s);
    }
    MeanRoc {
        fpr,
        tpr_mean,
        tpr_std,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    pub fraction: f64,
    pub mean_train_rows: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
}

/// AUC as a function of training-set size. Within each fold the training
/// groups are subsampled per class (seeded), the test fold is untouched.
pub fn learning_curve(
    input: &CvInput,
    fractions: &[f64],
    params: &GbdtParams,
    cv: &CvSettings,
) -> Result<Vec<LearningPoint>> {
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "fraction {f} outside (0, 1]"
        )));
    }
    let assignment = assign_folds(&input.labels, &input.groups, cv.k, cv.seed)?;
    fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| {
            let per_fold = (0..cv.k)
                .into_par_iter()
                .map(|fold| {
                    let (train_rows, test_rows) = assignment.split(fold);
                    let sub_seed = cv.seed ^ ((fold as u64) << 32) ^ (fi as u64);
                    let kept = subsample_groups(
                        &train_rows,
                        &input.labels,
                        &input.groups,
                        fraction,
                        sub_seed,
                    );
                    if !has_both_classes(&kept, &input.labels) {
                        return Err(Error::SingleClass(format!(
                            "fraction {fraction} leaves one class in fold {fold}"
                        )));
                    }
                    let scores = fit_and_score(input, &kept, &test_rows, params)?;
                    let y: Vec<u8> = test_rows.iter().map(|&r| input.labels[r]).collect();
                    Ok((roc_auc(&scores, &y)?, kept.len()))
                })
                .collect::<Result<Vec<_>>>()?;
            let aucs: Vec<f64> = per_fold.iter().map(|p| p.0).collect();
            let (auc_mean, auc_std) = mean_std(&aucs);
            let mean_train_rows =
                per_fold.iter().map(|p| p.1 as f64).sum::<f64>() / per_fold.len() as f64;
            Ok(LearningPoint {
                fraction,
                mean_train_rows,
                auc_mean,
                auc_std,
            })
        })
        .collect()
}

/// Keeps `ceil(fraction * n)` groups of each class, returns their rows in
/// ascending order.
fn subsample_groups(
    rows: &[usize],
    labels: &[u8],
    groups: &[String],
    fraction: f64,
    seed: u64,
) -> Vec<usize> {
    let mut per_class: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for &r in rows {
        per_class[usize::from(labels[r].min(1))].insert(groups[r].as_str());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: BTreeSet<&str> = BTreeSet::new();
    for class in &per_class {
        let mut ids: Vec<&str> = class.iter().copied().collect();
        ids.shuffle(&mut rng);
        let n = ((fraction * ids.len() as f64).ceil() as usize).min(ids.len());
        keep.extend(&ids[..n]);
    }
    rows.iter()
        .copied()
        .filter(|&r| keep.contains(groups[r].as_str()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Modality;

    fn toy_input(n_per_class: usize, reps: usize, separable: bool) -> CvInput {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut groups = Vec::new();
        for p in 0..2 * n_per_class {
            let y = u8::from(p < n_per_class);
            for r in 0..reps {
                let base = if separable { f64::from(y) * 10.0 } else { 0.0 };
                let jitter = ((p * 7 + r * 3) % 11) as f64 / 11.0;
                rows.push(vec![base + jitter, jitter * 2.0, (p % 5) as f64]);
                labels.push(y);
                groups.push(format!("P{p:03}"));
            }
        }
        let block = ModalityBlock::from_rows(
            Modality::Ftir,
            groups.clone(),
            rows,
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        CvInput::new(vec![block], labels, groups).unwrap()
    }

    fn quick() -> GbdtParams {
        GbdtParams {
            n_rounds: 10,
            ..Default::default()
        }
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let input = toy_input(15, 1, true);
        let r = cross_validate(
            &input,
            &quick(),
            &CvSettings {
                k: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.summary.auc.mean >= 0.99);
        assert_eq!(r.summary.n, 30);
        assert_eq!(r.folds.len(), 5);
        assert_eq!(r.mean_roc.fpr.len(), ROC_GRID_POINTS);
    }

    #[test]
    fn replicates_never_straddle_train_and_test() {
        let input = toy_input(10, 3, false);
        let r = cross_validate(
            &input,
            &quick(),
            &CvSettings {
                k: 4,
                ..Default::default()
            },
        )
        .unwrap();
        for f in 0..4 {
            let (train, test) = r.assignment.split(f);
            let train_groups: BTreeSet<&String> = train.iter().map(|&i| &input.groups[i]).collect();
            assert!(test
                .iter()
                .all(|&i| !train_groups.contains(&input.groups[i])));
        }
    }

    #[test]
    fn learning_curve_full_fraction_reproduces_cv() {
        let input = toy_input(12, 2, false);
        let cv = CvSettings {
            k: 4,
            ..Default::default()
        };
        let full = cross_validate(&input, &quick(), &cv).unwrap();
        let lc = learning_curve(&input, &[0.5, 1.0], &quick(), &cv).unwrap();
        assert_eq!(lc.len(), 2);
        assert_eq!(lc[1].auc_mean, full.summary.auc.mean);
        assert!(learning_curve(&input, &[0.0], &quick(), &cv).is_err());
    }
}
