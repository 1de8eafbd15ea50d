//! Two-component PCA on mean-centred feature rows, used for score plots.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// `n_rows x n_components` scores, row-major.
    pub scores: Vec<Vec<f64>>,
    /// Unit loading vectors, one per component.
    pub loadings: Vec<Vec<f64>>,
    /// Fraction of total variance per component.
    pub explained_variance_ratio: Vec<f64>,
}

/// Projects `rows` onto their leading `n_components` principal axes.
///
/// Each loading is oriented so that its largest-magnitude entry is positive.
pub fn pca_project(rows: &[Vec<f64>], n_components: usize) -> Result<PcaProjection> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::Empty("PCA rows have no features".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: r.len(),
        });
    }
    if n_components == 0 || n_components > n.min(d) {
        return Err(Error::InvalidParameter(format!(
            "n_components {n_components} must be in 1..={}",
            n.min(d)
        )));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total <= 1e-24 {
        return Err(Error::ZeroVariance("all PCA rows are identical".into()));
    }

    // Eigen-decompose the n x n Gram matrix; cheaper than d x d for wide spectra.
    let gram = &x * x.transpose();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut loadings = Vec::with_capacity(n_components);
    let mut ratios = Vec::with_capacity(n_components);
    for &c in order.iter().take(n_components) {
        let lambda = eig.eigenvalues[c].max(0.0);
        let u = eig.eigenvectors.column(c);
        let mut v: Vec<f64> = (x.transpose() * u).iter().copied().collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-300 {
            v.iter_mut().for_each(|a| *a /= norm);
        }
        let pivot = v.iter().copied().fold(
            0.0_f64,
            |best, a| if a.abs() > best.abs() { a } else { best },
        );
        if pivot < 0.0 {
            v.iter_mut().for_each(|a| *a = -*a);
        }
        loadings.push(v);
        ratios.push(lambda / total);
    }
    let scores = (0..n)
        .map(|i| {
            loadings
                .iter()
                .map(|l| l.iter().zip(x.row(i).iter()).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(PcaProjection {
        scores,
        loadings,
        explained_variance_ratio: ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_is_captured_by_one_component() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)])
            .collect();
        let p = pca_project(&rows, 2).unwrap();
        assert!(p.explained_variance_ratio[0] > 0.999);
        let l = &p.loadings[0];
        let s = 6f64.sqrt();
        for (a, b) in l.iter().zip([1.0 / s, 2.0 / s, -1.0 / s]) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_rows_fail() {
        assert!(matches!(
            pca_project(&[vec![1.0, 2.0], vec![1.0, 2.0]], 1),
            Err(Error::ZeroVariance(_))
        ));
    }
}
