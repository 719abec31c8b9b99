//! Feature encoding and grouped dataset splitting.
//!
//! Column order is fixed: signal one-hots, budget, industry one-hots,
//! aggressiveness, time bucket, category. Splits and folds group rows by
//! auction id so no auction straddles a boundary and leaks its signal or
//! state across splits.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::PredictorError;
use crate::market::{AuctionRecord, AD_CATEGORIES, TIME_BUCKETS};

/// Canonical column names for the fixed encoding.
pub fn feature_columns(signal_count: usize, sector_count: usize) -> Vec<String> {
    let mut columns = Vec::with_capacity(signal_count + sector_count + 4);
    for s in 0..signal_count {
        columns.push(format!("signal_{s}"));
    }
    columns.push(String::from("budget"));
    for k in 0..sector_count {
        columns.push(format!("industry_{k}"));
    }
    columns.push(String::from("aggressiveness"));
    columns.push(String::from("time_bucket"));
    columns.push(String::from("category"));
    columns
}

/// One advertiser-auction pair encoded in the fixed column order.
#[allow(clippy::too_many_arguments)] // the encoder signature is the column order
pub fn feature_row(
    signal: usize,
    budget: f64,
    industry: usize,
    aggressiveness: f64,
    time_bucket: u8,
    category: u8,
    signal_count: usize,
    sector_count: usize,
) -> Vec<f64> {
    let mut row = Vec::with_capacity(signal_count + sector_count + 4);
    for s in 0..signal_count {
        row.push(if s == signal { 1.0 } else { 0.0 });
    }
    row.push(budget);
    for k in 0..sector_count {
        row.push(if k == industry { 1.0 } else { 0.0 });
    }
    row.push(aggressiveness);
    row.push(time_bucket as f64);
    row.push(category as f64);
    row
}

/// Dense row-major feature matrix with its column manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, rows: usize, data: Vec<f64>) -> Result<Self, PredictorError> {
        if columns.is_empty() || data.len() != columns.len() * rows {
            return Err(PredictorError::DimensionMismatch {
                expected: columns.len() * rows,
                got: data.len(),
            });
        }
        Ok(Self {
            columns,
            rows,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let cols = self.columns.len();
        &self.data[index * cols..(index + 1) * cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Feature matrix, bid targets, and the auction-id group of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub targets: Vec<f64>,
    pub groups: Vec<u64>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    /// Copies the given rows (in the given order) into a new dataset.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let cols = self.features.n_cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        let mut targets = Vec::with_capacity(rows.len());
        let mut groups = Vec::with_capacity(rows.len());
        for &row in rows {
            data.extend_from_slice(self.features.row(row));
            targets.push(self.targets[row]);
            groups.push(self.groups[row]);
        }
        Dataset {
            features: FeatureMatrix::new(self.features.columns().to_vec(), rows.len(), data)
                .expect("selection preserves shape"),
            targets,
            groups,
        }
    }
}

/// Encodes settled auction records into (features, bid targets), one row
/// per advertiser-auction pair, in record order.
pub fn build_features(
    records: &[AuctionRecord],
    signal_count: usize,
    sector_count: usize,
) -> Result<Dataset, PredictorError> {
    if records.is_empty() {
        return Err(PredictorError::EmptyInput);
    }
    let columns = feature_columns(signal_count, sector_count);
    let cols = columns.len();
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut groups = Vec::new();
    let mut row = 0usize;
    for record in records {
        for participant in &record.participants {
            let violation = |reason: &str| PredictorError::SchemaViolation {
                row,
                reason: String::from(reason),
            };
            if record.signal >= signal_count {
                return Err(violation("signal index out of range"));
            }
            if participant.industry >= sector_count {
                return Err(violation("industry index out of range"));
            }
            if !participant.budget.is_finite() || !participant.bid.is_finite() {
                return Err(violation("non-finite budget or bid"));
            }
            if !(0.0..=1.0).contains(&participant.aggressiveness) {
                return Err(violation("aggressiveness outside [0, 1]"));
            }
            if record.time_bucket >= TIME_BUCKETS || record.category >= AD_CATEGORIES {
                return Err(violation("context feature out of range"));
            }
            data.extend_from_slice(&feature_row(
                record.signal,
                participant.budget,
                participant.industry,
                participant.aggressiveness,
                record.time_bucket,
                record.category,
                signal_count,
                sector_count,
            ));
            targets.push(participant.bid);
            groups.push(record.auction_id);
            row += 1;
        }
    }
    debug_assert_eq!(data.len(), cols * targets.len());
    Ok(Dataset {
        features: FeatureMatrix::new(columns, targets.len(), data)
            .expect("row construction fixes the width"),
        targets,
        groups,
    })
}

/// Splits into train/validation/test by auction group: the group list (in
/// first-appearance order) is shuffled, then cut so each part is within one
/// group of the exact ratios. The union is the whole dataset.
pub fn split_dataset<R: RngCore>(
    data: &Dataset,
    ratios: (f64, f64, f64),
    rng: &mut R,
) -> Result<(Dataset, Dataset, Dataset), PredictorError> {
    let (r_train, r_val, r_test) = ratios;
    let sum = r_train + r_val + r_test;
    if (sum - 1.0).abs() > 1e-9 || r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(PredictorError::BadRatios { sum });
    }

    let mut group_order: Vec<u64> = Vec::new();
    let mut seen = BTreeMap::new();
    for &group in &data.groups {
        if seen.insert(group, ()).is_none() {
            group_order.push(group);
        }
    }
    group_order.shuffle(rng);

    let total = group_order.len();
    let n_train = libm::round(r_train * total as f64) as usize;
    let n_val = libm::round(r_val * total as f64) as usize;
    let n_train = n_train.min(total);
    let n_val = n_val.min(total - n_train);

    let mut destination = BTreeMap::new();
    for (position, &group) in group_order.iter().enumerate() {
        let split = if position < n_train {
            0u8
        } else if position < n_train + n_val {
            1
        } else {
            2
        };
        destination.insert(group, split);
    }

    let mut rows: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (row, &group) in data.groups.iter().enumerate() {
        rows[destination[&group] as usize].push(row);
    }
    Ok((
        data.select(&rows[0]),
        data.select(&rows[1]),
        data.select(&rows[2]),
    ))
}

/// Round-robin assignment of auction groups to k folds, in group
/// first-appearance order.
pub fn fold_assignments(data: &Dataset, k: usize) -> Result<Vec<Vec<usize>>, PredictorError> {
    let mut group_fold = BTreeMap::new();
    let mut next = 0usize;
    for &group in &data.groups {
        group_fold.entry(group).or_insert_with(|| {
            let fold = next % k;
            next += 1;
            fold
        });
    }
    if next < k {
        return Err(PredictorError::TooFewGroups { groups: next, k });
    }
    let mut folds = alloc::vec![Vec::new(); k];
    for (row, &group) in data.groups.iter().enumerate() {
        folds[group_fold[&group]].push(row);
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::ParticipantRecord;
    use crate::seed::substream;
    use alloc::vec;

    fn record(auction_id: u64, signal: usize, bids: &[f64]) -> AuctionRecord {
        AuctionRecord {
            auction_id,
            signal,
            true_state: signal,
            time_bucket: 3,
            category: 1,
            participants: bids
                .iter()
                .enumerate()
                .map(|(i, &bid)| ParticipantRecord {
                    advertiser_id: i as u32,
                    budget: 9000.0 + i as f64,
                    industry: i % 3,
                    aggressiveness: 0.25,
                    bid,
                })
                .collect(),
            winner: 0,
            payment: 0.0,
        }
    }

    #[test]
    fn one_row_per_participant_with_one_hot_signal() {
        let records = vec![record(0, 1, &[1.0, 2.0]), record(1, 0, &[3.0, 4.0, 5.0])];
        let data = build_features(&records, 3, 3).unwrap();
        assert_eq!(data.n_rows(), 5);
        assert_eq!(data.features.n_cols(), 3 + 1 + 3 + 3);
        assert_eq!(data.targets, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(data.groups, vec![0, 0, 1, 1, 1]);
        for row in 0..data.n_rows() {
            let signal_sum: f64 = data.features.row(row)[..3].iter().sum();
            assert_eq!(signal_sum, 1.0);
        }

        // Deterministic encoding.
        let again = build_features(&records, 3, 3).unwrap();
        assert_eq!(data, again);
    }

    #[test]
    fn schema_violations_name_the_row() {
        let records = vec![record(0, 5, &[1.0])];
        match build_features(&records, 3, 3).unwrap_err() {
            PredictorError::SchemaViolation { row, .. } => assert_eq!(row, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn split_respects_groups_and_ratios() {
        let records: Vec<AuctionRecord> = (0..100)
            .map(|i| record(i, (i % 3) as usize, &[1.0, 2.0, 3.0]))
            .collect();
        let data = build_features(&records, 3, 3).unwrap();
        let mut rng = substream(11, "split");
        let (train, val, test) = split_dataset(&data, (0.70, 0.15, 0.15), &mut rng).unwrap();

        let groups = |d: &Dataset| {
            d.groups
                .iter()
                .copied()
                .collect::<alloc::collections::BTreeSet<_>>()
        };
        let (g_train, g_val, g_test) = (groups(&train), groups(&val), groups(&test));
        assert_eq!(g_train.len(), 70);
        assert_eq!(g_val.len(), 15);
        assert_eq!(g_test.len(), 15);
        assert!(g_train.is_disjoint(&g_val));
        assert!(g_train.is_disjoint(&g_test));
        assert!(g_val.is_disjoint(&g_test));
        assert_eq!(train.n_rows() + val.n_rows() + test.n_rows(), data.n_rows());

        // Same seed, same split.
        let mut rng = substream(11, "split");
        let (train2, _, _) = split_dataset(&data, (0.70, 0.15, 0.15), &mut rng).unwrap();
        assert_eq!(train, train2);

        assert!(matches!(
            split_dataset(&data, (0.5, 0.5, 0.5), &mut rng),
            Err(PredictorError::BadRatios { .. })
        ));
    }

    #[test]
    fn folds_partition_rows() {
        let records: Vec<AuctionRecord> = (0..10).map(|i| record(i, 0, &[1.0, 2.0])).collect();
        let data = build_features(&records, 1, 3).unwrap();
        let folds = fold_assignments(&data, 5).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..data.n_rows()).collect::<Vec<_>>());

        assert!(matches!(
            fold_assignments(&data, 11),
            Err(PredictorError::TooFewGroups { groups: 10, k: 11 })
        ));
    }
}
