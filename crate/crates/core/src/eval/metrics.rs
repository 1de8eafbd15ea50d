use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("metric needs both classes".into()));
    }
    Ok((pos, neg))
}

/// Mann-Whitney estimate of the area under the ROC curve: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the positive rank sum, using mid-ranks for ties
    let mut rank_sum2 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, mid-rank times two = i + j + 2
        let mid2 = (i + j + 2) as f64;
        for &r in &order[i..=j] {
            if labels[r] == 1 {
                rank_sum2 += mid2;
            }
        }
        i = j + 1;
    }
    let pos_f = pos as f64;
    let u2 = rank_sum2 - pos_f * (pos_f + 1.0);
    Ok(u2 / (2.0 * pos_f * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub balanced_accuracy: f64,
}

/// Scores `>= threshold` are called positive.
pub fn threshold_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<ThresholdMetrics> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut tp = 0usize;
    let mut tn = 0usize;
    for (&s, &y) in scores.iter().zip(labels) {
        let called = s >= threshold;
        match (y == 1, called) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    let sensitivity = tp as f64 / pos as f64;
    let specificity = tn as f64 / neg as f64;
    Ok(ThresholdMetrics {
        sensitivity,
        specificity,
        balanced_accuracy: (sensitivity + specificity) / 2.0,
    })
}

/// ROC operating points `(fpr, tpr)` from the strictest threshold down,
/// starting at (0, 0) and ending at (1, 1). Tied scores form one step.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// True positive rate of a ROC polyline at `fpr`: the highest TPR reached
/// at exactly that FPR, otherwise linear interpolation between neighbours.
pub fn interpolate_tpr(curve: &[(f64, f64)], fpr: f64) -> f64 {
    let at: Vec<f64> = curve.iter().filter(|p| p.0 == fpr).map(|p| p.1).collect();
    if let Some(best) = at.into_iter().reduce(f64::max) {
        return best;
    }
    let left = curve
        .iter()
        .rfind(|p| p.0 < fpr)
        .copied()
        .unwrap_or((0.0, 0.0));
    let right = curve
        .iter()
        .find(|p| p.0 > fpr)
        .copied()
        .unwrap_or((1.0, 1.0));
    left.1 + (right.1 - left.1) * (fpr - left.0) / (right.0 - left.0)
}

/// Arithmetic mean and sample (n-1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
