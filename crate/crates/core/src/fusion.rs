//! Patient alignment across modalities and low-level data fusion:
//! per-modality z-scoring fitted on training rows, division by the fourth
//! root of the block width, then horizontal concatenation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::error::{Error, Result};

/// Standard deviations below this are treated as zero.
pub const DEGENERATE_STD: f64 = 1e-12;

/// One modality's feature rows, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBlock {
    pub modality: Modality,
    /// Patient id of every row (several rows per patient at replicate level).
    pub row_ids: Vec<String>,
    pub n_cols: usize,
    pub values: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl ModalityBlock {
    pub fn from_rows(
        modality: Modality,
        row_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n_cols = feature_names.len();
        if n_cols == 0 {
            return Err(Error::Empty(format!("{modality} block has no features")));
        }
        if rows.len() != row_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: row_ids.len(),
                got: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            values.extend(r);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{modality} feature {v}")));
        }
        Ok(Self {
            modality,
            row_ids,
            n_cols,
            values,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    /// Feature count, `d_m`.
    pub fn width(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// New block holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ModalityBlock {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        ModalityBlock {
            modality: self.modality,
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            n_cols: self.n_cols,
            values,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Per-feature mean and population standard deviation from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreScaler {
    pub modality: Modality,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub degenerate: Vec<bool>,
}

pub fn zscore_fit(train: &ModalityBlock) -> Result<ZScoreScaler> {
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "z-score fit needs at least 2 training rows, got {n}"
        )));
    }
    let d = train.n_cols;
    let mut mu = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mu.iter_mut().zip(train.row(i)) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(train.row(i)).zip(&mu) {
            *s += (v - m) * (v - m);
        }
    }
    let sigma: Vec<f64> = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    let degenerate = sigma.iter().map(|&s| s < DEGENERATE_STD).collect();
    Ok(ZScoreScaler {
        modality: train.modality,
        mu,
        sigma,
        degenerate,
    })
}

/// `(x - mu) / sigma` per feature; degenerate features become 0.
pub fn zscore_transform(scaler: &ZScoreScaler, block: &ModalityBlock) -> Result<ModalityBlock> {
    if block.n_cols != scaler.mu.len() {
        return Err(Error::DimensionMismatch {
            expected: scaler.mu.len(),
            got: block.n_cols,
        });
    }
    let d = block.n_cols;
    let values = block
        .values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let j = k % d;
            if scaler.degenerate[j] {
                0.0
            } else {
                (v - scaler.mu[j]) / scaler.sigma[j]
            }
        })
        .collect();
    Ok(ModalityBlock {
        values,
        ..block.clone()
    })
}

/// `d_m^{1/4}`.
pub fn block_divisor(width: usize) -> f64 {
    (width as f64).powf(0.25)
}

/// Divides every entry by the fourth root of the block width.
pub fn block_scale(block: &ModalityBlock) -> ModalityBlock {
    let div = block_divisor(block.width());
    ModalityBlock {
        values: block.values.iter().map(|v| v / div).collect(),
        ..block.clone()
    }
}

/// Dense design matrix with per-row binary labels and patient groups.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row-major values.
    pub values: Vec<f64>,
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        n_cols: usize,
        values: Vec<f64>,
        labels: Vec<u8>,
        groups: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = labels.len();
        if groups.len() != n_rows {
            return Err(Error::DimensionMismatch {
                expected: n_rows,
                got: groups.len(),
            });
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                got: values.len(),
            });
        }
        if feature_names.len() != n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_cols,
                got: feature_names.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {v}")));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
            labels,
            groups,
            feature_names,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

/// Concatenates row-aligned blocks in canonical modality order
/// (FTIR, Raman, EEM). Feature names are prefixed with the modality.
pub fn fuse(blocks: &[ModalityBlock], labels: &[u8]) -> Result<FeatureMatrix> {
    let mut ordered: Vec<&ModalityBlock> = blocks.iter().collect();
    ordered.sort_by_key(|b| b.modality);
    let first = ordered
        .first()
        .ok_or_else(|| Error::Empty("no blocks to fuse".into()))?;
    for b in &ordered[1..] {
        if b.row_ids != first.row_ids {
            return Err(Error::InvalidParameter(format!(
                "{} rows are not aligned with {} rows",
                b.modality, first.modality
            )));
        }
    }
    let n_rows = first.n_rows();
    if labels.len() != n_rows {
        return Err(Error::DimensionMismatch {
            expected: n_rows,
            got: labels.len(),
        });
    }
    let n_cols: usize = ordered.iter().map(|b| b.width()).sum();
    let mut values = Vec::with_capacity(n_rows * n_cols);
    for i in 0..n_rows {
        for b in &ordered {
            values.extend_from_slice(b.row(i));
        }
    }
    let feature_names = ordered
        .iter()
        .flat_map(|b| {
            b.feature_names
                .iter()
                .map(move |n| format!("{}:{n}", b.modality))
        })
        .collect();
    FeatureMatrix::new(
        n_cols,
        values,
        labels.to_vec(),
        first.row_ids.clone(),
        feature_names,
    )
}

/// Sorted patient ids present in every modality of `subset`.
pub fn align_patients<V>(
    tables: &BTreeMap<Modality, BTreeMap<String, V>>,
    subset: &[Modality],
) -> Result<Vec<String>> {
    let names = || {
        subset
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join("+")
    };
    if subset.is_empty() {
        return Err(Error::Empty("modality subset".into()));
    }
    let mut common: Option<BTreeSet<&String>> = None;
    for m in subset {
        let ids: BTreeSet<&String> = tables
            .get(m)
            .map(|t| t.keys().collect())
            .unwrap_or_default();
        common = Some(match common {
            None => ids,
            Some(c) => c.intersection(&ids).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.is_empty() {
        return Err(Error::EmptyIntersection(names()));
    }
    Ok(common.into_iter().cloned().collect())
}

/// Mean of a patient's preprocessed replicate vectors.
pub fn collapse_replicates_for_fusion(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Empty("no replicate vectors to collapse".into()))?;
    if vectors.len() == 1 {
        return Ok(first.clone());
    }
    let mut acc = vec![0.0; first.len()];
    for v in vectors {
        if v.len() != acc.len() {
            return Err(Error::DimensionMismatch {
                expected: acc.len(),
                got: v.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Scalers fitted on the training rows of every block of one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScaling {
    pub scalers: Vec<ZScoreScaler>,
}

impl FoldScaling {
    /// Fits one scaler per block using only `train_rows`.
    pub fn fit(blocks: &[ModalityBlock], train_rows: &[usize]) -> Result<Self> {
        let scalers = blocks
            .iter()
            .map(|b| zscore_fit(&b.select_rows(train_rows)))
            .collect::<Result<_>>()?;
        Ok(Self { scalers })
    }

    /// Standardizes, block-scales and fuses the selected rows.
    pub fn transform(
        &self,
        blocks: &[ModalityBlock],
        rows: &[usize],
        labels: &[u8],
    ) -> Result<FeatureMatrix> {
        let scaled = blocks
            .iter()
            .zip(&self.scalers)
            .map(|(b, s)| Ok(block_scale(&zscore_transform(s, &b.select_rows(rows))?)))
            .collect::<Result<Vec<_>>>()?;
        let row_labels: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
        fuse(&scaled, &row_labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(modality: Modality, rows: Vec<Vec<f64>>) -> ModalityBlock {
        let d = rows[0].len();
        let ids = (0..rows.len()).map(|i| format!("P{i:03}")).collect();
        let names = (0..d).map(|j| format!("f{j}")).collect();
        ModalityBlock::from_rows(modality, ids, rows, names).unwrap()
    }

    fn random_block(modality: Modality, n: usize, d: usize, seed: u64) -> ModalityBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        block(
            modality,
            (0..n)
                .map(|_| {
                    (0..d)
                        .map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64 + j as f64)
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn zscore_basic_column() {
        let s = zscore_fit(&block(Modality::Ftir, vec![vec![1.0, 5.0], vec![3.0, 5.0]])).unwrap();
        assert_eq!(s.mu, vec![2.0, 5.0]);
        assert_eq!(s.sigma[0], 1.0);
        assert_eq!(s.degenerate, vec![false, true]);
        assert!(zscore_fit(&block(Modality::Ftir, vec![vec![1.0]])).is_err());
    }

    #[test]
    fn zscore_matches_naive_loops() {
        let b = random_block(Modality::Raman, 20, 5, 9);
        let s = zscore_fit(&b).unwrap();
        for j in 0..5 {
            let col: Vec<f64> = (0..20).map(|i| b.values[i * 5 + j]).collect();
            let m = col.iter().sum::<f64>() / 20.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 20.0).sqrt();
            assert!((s.mu[j] - m).abs() <= 1e-12);
            assert!((s.sigma[j] - sd).abs() <= 1e-12);
        }
    }

    #[test]
    fn transform_train_moments_and_degenerate_zero() {
        let mut b = random_block(Modality::Ftir, 30, 4, 2);
        for i in 0..30 {
            b.values[i * 4 + 2] = 7.0;
        }
        let s = zscore_fit(&b).unwrap();
        let t = zscore_transform(&s, &b).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = (0..30).map(|i| t.values[i * 4 + j]).collect();
            if j == 2 {
                assert!(col.iter().all(|&v| v == 0.0));
                continue;
            }
            let m = col.iter().sum::<f64>() / 30.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 30.0).sqrt();
            assert!(m.abs() <= 1e-10);
            assert!((sd - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn held_out_row_uses_train_statistics() {
        let train = block(Modality::Eem, vec![vec![1.0], vec![3.0], vec![5.0]]);
        let s = zscore_fit(&train).unwrap();
        let before = s.clone();
        let test = block(Modality::Eem, vec![vec![10.0]]);
        let t = zscore_transform(&s, &test).unwrap();
        let sd = (8.0f64 / 3.0).sqrt();
        assert!((t.values[0] - (10.0 - 3.0) / sd).abs() < 1e-12);
        assert_eq!(s, before);
        let wide = block(Modality::Eem, vec![vec![1.0, 2.0]]);
        assert!(zscore_transform(&s, &wide).is_err());
    }

    #[test]
    fn block_scaling() {
        let b = block(Modality::Ftir, vec![vec![4.0; 16]]);
        assert!(block_scale(&b).values.iter().all(|&v| v == 2.0));
        let one = block(Modality::Ftir, vec![vec![3.0]]);
        assert_eq!(block_scale(&one).values, vec![3.0]);
    }

    #[test]
    fn fuse_widths_order_and_rows() {
        let a = random_block(Modality::Eem, 6, 5, 1);
        let b = random_block(Modality::Ftir, 6, 10, 2);
        let labels = vec![0, 1, 0, 1, 0, 1];
        let f = fuse(&[a.clone(), b.clone()], &labels).unwrap();
        assert_eq!(f.n_cols, 15);
        assert!(f.feature_names[0].starts_with("FTIR:"));
        for i in 0..6 {
            let expected: Vec<f64> = b.row(i).iter().chain(a.row(i)).copied().collect();
            assert_eq!(f.row(i), expected.as_slice());
        }
        let single = fuse(std::slice::from_ref(&a), &labels).unwrap();
        assert_eq!(single.values, a.values);

        let mut shifted = a.clone();
        shifted.row_ids.rotate_left(1);
        assert!(fuse(&[shifted, b], &labels).is_err());
    }

    #[test]
    fn alignment() {
        let mut tables: BTreeMap<Modality, BTreeMap<String, ()>> = BTreeMap::new();
        tables.insert(
            Modality::Ftir,
            ["a", "b", "c"]
                .iter()
                .map(|s| (s.to_string(), ()))
                .collect(),
        );
        tables.insert(
            Modality::Raman,
            ["b", "c", "d"]
                .iter()
                .map(|s| (s.to_string(), ()))
                .collect(),
        );
        tables.insert(
            Modality::Eem,
            ["x"].iter().map(|s| (s.to_string(), ())).collect(),
        );
        assert_eq!(
            align_patients(&tables, &[Modality::Ftir, Modality::Raman]).unwrap(),
            vec!["b", "c"]
        );
        assert_eq!(align_patients(&tables, &[Modality::Ftir]).unwrap().len(), 3);
        assert!(matches!(
            align_patients(&tables, &[Modality::Ftir, Modality::Eem]),
            Err(Error::EmptyIntersection(_))
        ));
    }

    #[test]
    fn replicate_collapse() {
        let v = vec![1.0, 2.0];
        assert_eq!(
            collapse_replicates_for_fusion(std::slice::from_ref(&v)).unwrap(),
            v
        );
        assert_eq!(
            collapse_replicates_for_fusion(&[v.clone(), v.clone()]).unwrap(),
            v
        );
        assert!(collapse_replicates_for_fusion(&[]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..8).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let m = collapse_replicates_for_fusion(&reps).unwrap();
        for j in 0..8 {
            assert!((m[j] - (reps[0][j] + reps[1][j] + reps[2][j]) / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn scaler_json_round_trip() {
        let s = zscore_fit(&random_block(Modality::Raman, 4, 3, 5)).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"modality\":\"Raman\""));
        assert_eq!(serde_json::from_str::<ZScoreScaler>(&json).unwrap(), s);
    }
}
