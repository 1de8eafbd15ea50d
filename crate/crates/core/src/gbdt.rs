//! Gradient-boosted regression trees for binary classification with the
//! logistic loss, second-order split gain and exact greedy split search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FeatureMatrix;

/// Lower bound on per-row hessians.
const MIN_HESSIAN: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub reg_lambda: f64,
    pub gamma: f64,
    pub base_score: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            min_child_weight: 1.0,
            reg_lambda: 1.0,
            gamma: 0.0,
            base_score: 0.5,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds < 1 {
            return Err(Error::InvalidParameter("n_rounds must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "base_score must lie in (0, 1), got {}",
                self.base_score
            )));
        }
        if self.reg_lambda < 0.0 || self.gamma < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::InvalidParameter(
                "regularization terms must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Regression tree stored as parallel node arrays. Leaves have
/// `left == right == -1`; rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub leaf_value: Vec<f64>,
    pub gain: Vec<f64>,
}

impl Tree {
    fn with_root() -> Self {
        let mut t = Tree {
            feature: vec![],
            threshold: vec![],
            left: vec![],
            right: vec![],
            leaf_value: vec![],
            gain: vec![],
        };
        t.push_leaf(0.0);
        t
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(-1);
        self.right.push(-1);
        self.leaf_value.push(value);
        self.gain.push(0.0);
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.left[node] < 0
    }

    /// Raw leaf value (before learning-rate shrinkage) reached by `x`.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        while !self.is_leaf(node) {
            node = if x[self.feature[node] as usize] < self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        self.leaf_value[node]
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, n: usize) -> usize {
            if t.is_leaf(n) {
                0
            } else {
                1 + walk(t, t.left[n] as usize).max(walk(t, t.right[n] as usize))
            }
        }
        walk(self, 0)
    }

    /// Indices of features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.feature
            .iter()
            .filter(|&&f| f >= 0)
            .map(|&f| f as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    /// Model with no trees: predicts `base_score` everywhere.
    pub fn empty(params: GbdtParams, n_features: usize) -> Self {
        Self {
            params,
            n_features,
            trees: vec![],
        }
    }

    pub fn margin_row(&self, x: &[f64]) -> f64 {
        let eta = self.params.learning_rate;
        self.trees
            .iter()
            .fold(logit(self.params.base_score), |m, t| {
                m + eta * t.predict_row(x)
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

/// Mean logistic loss of margins against binary labels.
pub fn logistic_loss(margins: &[f64], y: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| {
            // log(1 + e^m) - t*m, evaluated stably
            let softplus = if m > 0.0 {
                m + (-m).exp().ln_1p()
            } else {
                m.exp().ln_1p()
            };
            softplus - f64::from(t) * m
        })
        .sum();
    total / margins.len() as f64
}

/// Second-order gain of splitting a node with sums (G, H) into
/// (G_L, H_L) and (G - G_L, H - H_L).
pub fn split_gain(
    g_left: f64,
    h_left: f64,
    g_total: f64,
    h_total: f64,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let g_right = g_total - g_left;
    let h_right = h_total - h_left;
    0.5 * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda)
        - g_total * g_total / (h_total + lambda))
        - gamma
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

/// Per-feature row orderings shared by every boosting round.
struct SortedColumns {
    /// For feature j: (row, value) pairs ascending by value, ties by row.
    cols: Vec<Vec<(u32, f64)>>,
}

impl SortedColumns {
    fn new(x: &FeatureMatrix) -> Self {
        let cols = (0..x.n_cols)
            .map(|j| {
                let mut col: Vec<(u32, f64)> = (0..x.n_rows)
                    .map(|i| (i as u32, x.values[i * x.n_cols + j]))
                    .collect();
                col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                // constant columns can never split
                if col.first().map(|c| c.1) == col.last().map(|c| c.1) {
                    col.clear();
                }
                col
            })
            .collect();
        Self { cols }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[derive(Clone, Copy, Default)]
struct ScanState {
    g_left: f64,
    h_left: f64,
    last: f64,
    seen: bool,
}

/// Training history alongside the model: mean logistic loss on the
/// training rows before any tree and after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model: GbdtModel,
    pub loss_history: Vec<f64>,
}

pub fn train(x: &FeatureMatrix, y: &[u8], params: &GbdtParams) -> Result<GbdtModel> {
    Ok(train_with_history(x, y, params)?.model)
}

pub fn train_with_history(x: &FeatureMatrix, y: &[u8], params: &GbdtParams) -> Result<TrainReport> {
    params.validate()?;
    let n = x.n_rows;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "training needs at least 2 rows, got {n}"
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass("training labels".into()));
    }
    if let Some(v) = x.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("training feature {v}")));
    }

    let sorted = SortedColumns::new(x);
    let mut margin = vec![logit(params.base_score); n];
    let mut history = vec![logistic_loss(&margin, y)];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.n_rounds {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = (p * (1.0 - p)).max(MIN_HESSIAN);
        }
        let (tree, leaf_of_row) = grow_tree(x, &sorted, &grad, &hess, params);
        for i in 0..n {
            margin[i] += params.learning_rate * tree.leaf_value[leaf_of_row[i]];
        }
        history.push(logistic_loss(&margin, y));
        trees.push(tree);
    }
    Ok(TrainReport {
        model: GbdtModel {
            params: *params,
            n_features: x.n_cols,
            trees,
        },
        loss_history: history,
    })
}

/// Depth-wise exact greedy growth. Returns the tree and the leaf reached by
/// every training row.
fn grow_tree(
    x: &FeatureMatrix,
    sorted: &SortedColumns,
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> (Tree, Vec<usize>) {
    let n = x.n_rows;
    let lambda = params.reg_lambda;
    let mut tree = Tree::with_root();
    // tree node of every row
    let mut node_of_row = vec![0usize; n];
    // nodes still open for splitting, and their (G, H)
    let mut open: Vec<(usize, f64, f64)> = vec![(0, grad.iter().sum(), hess.iter().sum())];
    // slot in `open` per tree node; usize::MAX when closed
    let mut slot_of_node: Vec<usize> = vec![0];

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
        let mut state = vec![ScanState::default(); open.len()];
        let slot_of_row: Vec<usize> = node_of_row.iter().map(|&nd| slot_of_node[nd]).collect();
        for (feature, col) in sorted.cols.iter().enumerate() {
            if col.is_empty() {
                continue;
            }
            state.iter_mut().for_each(|s| *s = ScanState::default());
            for &(row, value) in col {
                let row = row as usize;
                let slot = slot_of_row[row];
                if slot == usize::MAX {
                    continue;
                }
                let st = &mut state[slot];
                if st.seen && value > st.last {
                    let (_, g_total, h_total) = open[slot];
                    let h_right = h_total - st.h_left;
                    if st.h_left >= params.min_child_weight && h_right >= params.min_child_weight {
                        let gain = split_gain(
                            st.g_left,
                            st.h_left,
                            g_total,
                            h_total,
                            lambda,
                            params.gamma,
                        );
                        if best[slot].is_none_or(|b| gain > b.gain) {
                            let mid = 0.5 * (st.last + value);
                            let threshold = if mid > st.last { mid } else { value };
                            best[slot] = Some(Candidate {
                                gain,
                                feature,
                                threshold,
                            });
                        }
                    }
                }
                st.g_left += grad[row];
                st.h_left += hess[row];
                st.last = value;
                st.seen = true;
            }
        }

        // split decisions, indexed by slot in `open`
        let mut split_of_slot: Vec<Option<(usize, usize, usize, f64)>> = vec![None; open.len()];
        for (slot, &(node, g, h)) in open.iter().enumerate() {
            slot_of_node[node] = usize::MAX;
            match best[slot] {
                Some(c) if c.gain > 0.0 => {
                    let left = tree.push_leaf(0.0);
                    let right = tree.push_leaf(0.0);
                    tree.feature[node] = c.feature as i64;
                    tree.threshold[node] = c.threshold;
                    tree.left[node] = left as i64;
                    tree.right[node] = right as i64;
                    tree.gain[node] = c.gain;
                    split_of_slot[slot] = Some((left, right, c.feature, c.threshold));
                }
                _ => tree.leaf_value[node] = leaf_weight(g, h, lambda),
            }
        }
        let mut route: Vec<Option<(usize, usize, usize, f64)>> = vec![None; tree.n_nodes()];
        for (slot, &(node, _, _)) in open.iter().enumerate() {
            route[node] = split_of_slot[slot];
        }
        slot_of_node.resize(tree.n_nodes(), usize::MAX);

        let mut sums: Vec<(f64, f64)> = vec![(0.0, 0.0); tree.n_nodes()];
        for row in 0..n {
            if let Some((left, right, feature, threshold)) = route[node_of_row[row]] {
                let child = if x.values[row * x.n_cols + feature] < threshold {
                    left
                } else {
                    right
                };
                node_of_row[row] = child;
                sums[child].0 += grad[row];
                sums[child].1 += hess[row];
            }
        }
        let mut next_open = Vec::new();
        for &(left, right, _, _) in split_of_slot.iter().flatten() {
            for child in [left, right] {
                slot_of_node[child] = next_open.len();
                next_open.push((child, sums[child].0, sums[child].1));
            }
        }
        open = next_open;
    }
    // nodes left open at max depth become leaves
    for &(node, g, h) in &open {
        tree.leaf_value[node] = leaf_weight(g, h, lambda);
    }
    (tree, node_of_row)
}

pub fn predict_proba(model: &GbdtModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.n_cols != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            got: x.n_cols,
        });
    }
    Ok((0..x.n_rows)
        .map(|i| sigmoid(model.margin_row(x.row(i))))
        .collect())
}
