use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold index per row; all rows of one group share a fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of_row: Vec<usize>,
    pub groups: Vec<String>,
}

impl FoldAssignment {
    /// (train rows, test rows) for `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_of_row.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Grouped, stratified k-fold assignment.
///
/// Groups are shuffled with `seed`, stably ordered by size (largest first)
/// and placed one at a time into the fold holding the fewest rows of the
/// group's class; ties go to the fold with the fewest rows overall, then to
/// the lowest fold index.
pub fn stratified_group_kfold(
    labels: &[u8],
    groups: &[String],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    if labels.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: groups.len(),
        });
    }
    // group -> (label, rows)
    let mut by_group: BTreeMap<&str, (u8, Vec<usize>)> = BTreeMap::new();
    for (i, (g, &y)) in groups.iter().zip(labels).enumerate() {
        let entry = by_group.entry(g.as_str()).or_insert((y, Vec::new()));
        if entry.0 != y {
            return Err(Error::MixedGroupLabel(g.clone()));
        }
        entry.1.push(i);
    }
    if by_group.len() < k {
        return Err(Error::TooFewGroups {
            groups: by_group.len(),
            folds: k,
        });
    }

    let mut order: Vec<(&str, u8, &Vec<usize>)> = by_group
        .iter()
        .map(|(g, (y, rows))| (*g, *y, rows))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by_key(|g| std::cmp::Reverse(g.2.len()));

    let mut class_rows = vec![[0usize; 2]; k];
    let mut total_rows = vec![0usize; k];
    let mut fold_of_row = vec![usize::MAX; labels.len()];
    for (_, y, rows) in order {
        let c = usize::from(y.min(1));
        let fold = (0..k)
            .min_by_key(|&f| (class_rows[f][c], total_rows[f], f))
            .expect("k >= 2");
        class_rows[fold][c] += rows.len();
        total_rows[fold] += rows.len();
        for &r in rows {
            fold_of_row[r] = fold;
        }
    }
    Ok(FoldAssignment {
        k,
        fold_of_row,
        groups: groups.to_vec(),
    })
}
