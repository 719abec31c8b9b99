//! Gradient-boosted regression trees for bid prediction.
//!
//! Least-squares boosting: start from the training mean, then at each
//! stage fit a depth-limited tree to the current residuals and add it with
//! a shrinkage learning rate. Split search is exact (no histograms) and
//! all internal orderings are canonicalized, so a trained model — and every
//! prediction it makes — is a pure function of the training multiset,
//! independent of row order. There is no early stopping; the tree count is
//! exactly what the hyperparameters say.

mod features;
mod metrics;
mod tree;

pub use features::{
    build_features, feature_columns, feature_row, fold_assignments, split_dataset, Dataset,
    FeatureMatrix,
};
pub use metrics::{regression_metrics, RegressionMetrics};
pub use tree::TreeNode;

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use tree::{presort_columns, TreeFitter};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictorError {
    #[error("input is empty")]
    EmptyInput,
    #[error("row {row} violates the dataset schema: {reason}")]
    SchemaViolation { row: usize, reason: String },
    #[error("split ratios must be non-negative and sum to 1, got {sum}")]
    BadRatios { sum: f64 },
    #[error("{groups} auction groups cannot fill {k} folds")]
    TooFewGroups { groups: usize, k: usize },
    #[error("cross-validation needs k >= 2, got {0}")]
    BadFoldCount(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature columns do not match the model's training manifest")]
    ColumnMismatch,
    #[error("cannot train on an empty dataset")]
    DegenerateTraining,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("prediction bounds must be finite with floor {floor} < cap {cap}")]
    InvalidBounds { floor: f64, cap: f64 },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
}

/// One boosting configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_trees: usize,
    pub min_samples_leaf: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_depth: 5,
            n_trees: 200,
            min_samples_leaf: 20,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<(), PredictorError> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 || self.learning_rate > 1.0
        {
            return Err(PredictorError::InvalidHyperparams(alloc::format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(PredictorError::InvalidHyperparams(String::from(
                "max_depth must be >= 1",
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(PredictorError::InvalidHyperparams(String::from(
                "min_samples_leaf must be >= 1",
            )));
        }
        Ok(())
    }
}

/// Grid-search axes. Every combination of the three axes is trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub learning_rates: Vec<f64>,
    pub max_depths: Vec<usize>,
    pub n_trees: Vec<usize>,
    pub min_samples_leaf: usize,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            learning_rates: alloc::vec![0.01, 0.1, 0.2],
            max_depths: alloc::vec![3, 5, 7],
            n_trees: alloc::vec![100, 200, 500],
            min_samples_leaf: 20,
        }
    }
}

impl HyperGrid {
    /// Combinations in a fixed order: learning rate, then depth, then trees.
    pub fn combos(&self) -> Result<Vec<Hyperparams>, PredictorError> {
        if self.learning_rates.is_empty() || self.max_depths.is_empty() || self.n_trees.is_empty() {
            return Err(PredictorError::EmptyGrid);
        }
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &max_depth in &self.max_depths {
                for &n_trees in &self.n_trees {
                    out.push(Hyperparams {
                        learning_rate,
                        max_depth,
                        n_trees,
                        min_samples_leaf: self.min_samples_leaf,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Trained boosted ensemble. Leaf values carry the learning rate already,
/// so prediction is `initial_prediction + Σ tree(x)`, clamped to the bid
/// range it was trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub initial_prediction: f64,
    pub hyperparams: Hyperparams,
    pub bid_floor: f64,
    pub bid_cap: f64,
    pub feature_columns: Vec<String>,
    pub trees: Vec<TreeNode>,
}

impl GbmModel {
    pub fn n_features(&self) -> usize {
        self.feature_columns.len()
    }

    /// Predicts one encoded row.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64, PredictorError> {
        if row.len() != self.feature_columns.len() {
            return Err(PredictorError::DimensionMismatch {
                expected: self.feature_columns.len(),
                got: row.len(),
            });
        }
        let mut prediction = self.initial_prediction;
        for tree in &self.trees {
            prediction += tree.eval(row);
        }
        Ok(prediction.clamp(self.bid_floor, self.bid_cap))
    }

    /// Predicts a whole matrix; the column manifest must match training.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>, PredictorError> {
        if features.columns() != &self.feature_columns[..] {
            return Err(PredictorError::ColumnMismatch);
        }
        (0..features.n_rows())
            .map(|r| self.predict_row(features.row(r)))
            .collect()
    }
}

/// Trains a model and returns the per-stage training MSE curve alongside it
/// (stage 0 is the mean-only model). The curve is non-increasing: each
/// stage's least-squares leaves can only lower the training loss.
pub fn train_gbm_traced(
    train: &Dataset,
    hp: &Hyperparams,
    bounds: (f64, f64),
) -> Result<(GbmModel, Vec<f64>), PredictorError> {
    hp.validate()?;
    let (floor, cap) = bounds;
    if !floor.is_finite() || !cap.is_finite() || floor >= cap {
        return Err(PredictorError::InvalidBounds { floor, cap });
    }
    let n = train.n_rows();
    if n == 0 {
        return Err(PredictorError::DegenerateTraining);
    }
    let cols = train.features.n_cols();

    // Canonical row order: sort by content so identical multisets of rows
    // always train the identical model.
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let row_a = train.features.row(a as usize);
        let row_b = train.features.row(b as usize);
        for (x, y) in row_a.iter().zip(row_b) {
            match x.total_cmp(y) {
                core::cmp::Ordering::Equal => {}
                other => return other,
            }
        }
        train.targets[a as usize].total_cmp(&train.targets[b as usize])
    });
    let mut features = Vec::with_capacity(n * cols);
    let mut targets = Vec::with_capacity(n);
    for &row in &order {
        features.extend_from_slice(train.features.row(row as usize));
        targets.push(train.targets[row as usize]);
    }

    let sorted_columns = presort_columns(&features, cols, n);

    let initial_prediction = targets.iter().sum::<f64>() / n as f64;
    let mut predictions = alloc::vec![initial_prediction; n];
    let mut residuals: Vec<f64> = targets
        .iter()
        .zip(&predictions)
        .map(|(t, p)| t - p)
        .collect();
    let mse = |residuals: &[f64]| residuals.iter().map(|r| r * r).sum::<f64>() / n as f64;

    let mut trace = Vec::with_capacity(hp.n_trees + 1);
    trace.push(mse(&residuals));
    let mut trees = Vec::with_capacity(hp.n_trees);
    for _ in 0..hp.n_trees {
        let tree = TreeFitter::new(
            &features,
            cols,
            &residuals,
            hp.max_depth,
            hp.min_samples_leaf,
            hp.learning_rate,
        )
        .fit(sorted_columns.clone());
        for row in 0..n {
            predictions[row] += tree.eval(&features[row * cols..(row + 1) * cols]);
            residuals[row] = targets[row] - predictions[row];
        }
        trace.push(mse(&residuals));
        trees.push(tree);
    }

    Ok((
        GbmModel {
            initial_prediction,
            hyperparams: *hp,
            bid_floor: floor,
            bid_cap: cap,
            feature_columns: train.features.columns().to_vec(),
            trees,
        },
        trace,
    ))
}

/// [`train_gbm_traced`] without the loss curve.
pub fn train_gbm(
    train: &Dataset,
    hp: &Hyperparams,
    bounds: (f64, f64),
) -> Result<GbmModel, PredictorError> {
    train_gbm_traced(train, hp, bounds).map(|(model, _)| model)
}

/// One grid-search row: a configuration and its validation RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub hyperparams: Hyperparams,
    pub validation_rmse: f64,
}

/// Trains one grid combination and scores it on the validation set.
pub fn score_combo(
    train: &Dataset,
    validation: &Dataset,
    hp: &Hyperparams,
    bounds: (f64, f64),
) -> Result<LeaderboardEntry, PredictorError> {
    let model = train_gbm(train, hp, bounds)?;
    let predicted = model.predict(&validation.features)?;
    let metrics = regression_metrics(&predicted, &validation.targets)?;
    Ok(LeaderboardEntry {
        hyperparams: *hp,
        validation_rmse: metrics.rmse,
    })
}

/// Ascending validation RMSE; RMSE ties prefer fewer trees, then shallower
/// depth, then smaller learning rate.
pub fn rank_leaderboard(entries: &mut [LeaderboardEntry]) {
    entries.sort_by(|a, b| {
        a.validation_rmse
            .total_cmp(&b.validation_rmse)
            .then(a.hyperparams.n_trees.cmp(&b.hyperparams.n_trees))
            .then(a.hyperparams.max_depth.cmp(&b.hyperparams.max_depth))
            .then(
                a.hyperparams
                    .learning_rate
                    .total_cmp(&b.hyperparams.learning_rate),
            )
    });
}

/// Trains every grid combination on `train`, scores each on `validation`,
/// and returns the winner plus the ranked leaderboard.
pub fn tune_hyperparameters(
    train: &Dataset,
    validation: &Dataset,
    grid: &HyperGrid,
    bounds: (f64, f64),
) -> Result<(Hyperparams, Vec<LeaderboardEntry>), PredictorError> {
    let combos = grid.combos()?;
    let mut leaderboard = Vec::with_capacity(combos.len());
    for hp in &combos {
        leaderboard.push(score_combo(train, validation, hp, bounds)?);
    }
    rank_leaderboard(&mut leaderboard);
    Ok((leaderboard[0].hyperparams, leaderboard))
}

/// Mean and sample standard deviation of per-fold RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
}

/// k-fold cross-validation with folds grouped by auction id (round-robin
/// over groups in first-appearance order).
pub fn k_fold_cv(
    data: &Dataset,
    k: usize,
    hp: &Hyperparams,
    bounds: (f64, f64),
) -> Result<CvSummary, PredictorError> {
    if k < 2 {
        return Err(PredictorError::BadFoldCount(k));
    }
    let folds = fold_assignments(data, k)?;
    let mut fold_rmse = Vec::with_capacity(k);
    for fold in &folds {
        let in_fold: alloc::collections::BTreeSet<usize> = fold.iter().copied().collect();
        let train_rows: Vec<usize> = (0..data.n_rows())
            .filter(|row| !in_fold.contains(row))
            .collect();
        let model = train_gbm(&data.select(&train_rows), hp, bounds)?;
        let test = data.select(fold);
        let predicted = model.predict(&test.features)?;
        fold_rmse.push(regression_metrics(&predicted, &test.targets)?.rmse);
    }
    let mean_rmse = fold_rmse.iter().sum::<f64>() / k as f64;
    let var = fold_rmse
        .iter()
        .map(|r| (r - mean_rmse) * (r - mean_rmse))
        .sum::<f64>()
        / (k - 1) as f64;
    Ok(CvSummary {
        fold_rmse,
        mean_rmse,
        std_rmse: libm::sqrt(var),
    })
}
