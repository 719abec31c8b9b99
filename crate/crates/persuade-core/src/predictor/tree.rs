//! Depth-limited least-squares regression trees with exact greedy splits.
//!
//! Split search scans every feature column in pre-sorted order, so the
//! chosen split minimizes squared error exactly (no histogram binning).
//! All row sums run in per-column value order over a canonical row
//! ordering, which makes the fitted tree independent of input row order.

use alloc::boxed::Box;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Minimal gain for a split to be kept; gates vacuous splits on constant
/// residuals.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Routes a feature row to its leaf: left when `row[feature] < threshold`.
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

pub(crate) struct TreeFitter<'a> {
    /// Row-major feature matrix in canonical row order.
    features: &'a [f64],
    cols: usize,
    residuals: &'a [f64],
    max_depth: usize,
    min_samples_leaf: usize,
    /// Leaf values are shrunk by the learning rate at fit time.
    leaf_scale: f64,
    /// Scratch membership mask, indexed by row id. Each node writes the
    /// entries for its own rows before reading them.
    left_mask: Vec<bool>,
}

struct BestSplit {
    col: usize,
    threshold: f64,
    gain: f64,
}

impl<'a> TreeFitter<'a> {
    pub(crate) fn new(
        features: &'a [f64],
        cols: usize,
        residuals: &'a [f64],
        max_depth: usize,
        min_samples_leaf: usize,
        leaf_scale: f64,
    ) -> Self {
        let rows = residuals.len();
        Self {
            features,
            cols,
            residuals,
            max_depth,
            min_samples_leaf,
            leaf_scale,
            left_mask: alloc::vec![false; rows],
        }
    }

    #[inline]
    fn value(&self, row: u32, col: usize) -> f64 {
        self.features[row as usize * self.cols + col]
    }

    /// Fits one tree given per-column row lists sorted by feature value.
    pub(crate) fn fit(&mut self, sorted_columns: Vec<Vec<u32>>) -> TreeNode {
        self.build(sorted_columns, 0)
    }

    fn build(&mut self, columns: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let rows = &columns[0];
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| self.residuals[r as usize]).sum();
        let leaf = |total: f64| TreeNode::Leaf {
            value: total / n as f64 * self.leaf_scale,
        };

        if depth >= self.max_depth || n < 2 * self.min_samples_leaf {
            return leaf(total);
        }
        let best = match self.find_split(&columns, total) {
            Some(best) => best,
            None => return leaf(total),
        };

        for &row in &columns[best.col] {
            self.left_mask[row as usize] = self.value(row, best.col) < best.threshold;
        }
        let mut left_columns = Vec::with_capacity(self.cols);
        let mut right_columns = Vec::with_capacity(self.cols);
        for column in columns {
            let (left, right): (Vec<u32>, Vec<u32>) = column
                .into_iter()
                .partition(|&r| self.left_mask[r as usize]);
            left_columns.push(left);
            right_columns.push(right);
        }
        TreeNode::Split {
            feature: best.col,
            threshold: best.threshold,
            left: Box::new(self.build(left_columns, depth + 1)),
            right: Box::new(self.build(right_columns, depth + 1)),
        }
    }

    /// Exact greedy search: the best boundary between distinct consecutive
    /// values of any column. Strictly-greater gain wins, so ties resolve to
    /// the lowest column and then the lowest threshold.
    fn find_split(&self, columns: &[Vec<u32>], total: f64) -> Option<BestSplit> {
        let n = columns[0].len();
        let msl = self.min_samples_leaf;
        let base = total * total / n as f64;
        let mut best: Option<BestSplit> = None;

        for (col, rows) in columns.iter().enumerate() {
            let mut left_sum = 0.0;
            let mut value = self.value(rows[0], col);
            for i in 0..n - 1 {
                left_sum += self.residuals[rows[i] as usize];
                let next = self.value(rows[i + 1], col);
                let left_n = i + 1;
                let right_n = n - left_n;
                if value < next && left_n >= msl && right_n >= msl {
                    let threshold = value + (next - value) / 2.0;
                    // Adjacent floats can round the midpoint onto the lower
                    // value, which would put it on the wrong side.
                    if threshold > value {
                        let right_sum = total - left_sum;
                        let gain = left_sum * left_sum / left_n as f64
                            + right_sum * right_sum / right_n as f64
                            - base;
                        if gain > best.as_ref().map_or(GAIN_EPS, |b| b.gain) {
                            best = Some(BestSplit {
                                col,
                                threshold,
                                gain,
                            });
                        }
                    }
                }
                value = next;
            }
        }
        best
    }
}

/// Row ids 0..n sorted per column by (value, row id).
pub(crate) fn presort_columns(features: &[f64], cols: usize, rows: usize) -> Vec<Vec<u32>> {
    (0..cols)
        .map(|col| {
            let mut order: Vec<u32> = (0..rows as u32).collect();
            order.sort_by(|&a, &b| {
                features[a as usize * cols + col]
                    .total_cmp(&features[b as usize * cols + col])
                    .then(a.cmp(&b))
            });
            order
        })
        .collect()
}
