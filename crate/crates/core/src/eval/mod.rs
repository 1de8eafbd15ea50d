//! Grouped stratified cross-validation, metrics, learning curves and PCA.

pub mod cv;
pub mod folds;
pub mod metrics;
pub mod pca;

pub use cv::{
    assign_folds, cross_validate, fit_and_score, learning_curve, CvInput, CvReport, CvSettings,
    FoldReport, LearningPoint, MeanRoc, MetricStat, MetricsSummary,
};
pub use folds::{stratified_group_kfold, FoldAssignment};
pub use metrics::{
    interpolate_tpr, mean_std, roc_auc, roc_curve, threshold_metrics, ThresholdMetrics,
};
pub use pca::{pca_project, PcaProjection};
