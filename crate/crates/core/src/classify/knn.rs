//! k-nearest-neighbour classification on min-max scaled features.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::ClassifyError;
use crate::dataset::{ClassId, MinMaxScaler, NormalizedView, NumericDataset};

/// Training rows scaled to [0,1] with the scaler kept for queries.
#[derive(Clone, Debug)]
pub struct KnnModel {
    pub k: usize,
    train: NormalizedView,
    labels: Vec<ClassId>,
}

impl KnnModel {
    pub fn fit(train: &NumericDataset, k: usize) -> Result<Self, ClassifyError> {
        let n = train.n_rows();
        if n == 0 {
            return Err(ClassifyError::EmptyTraining);
        }
        if k == 0 || k > n {
            return Err(ClassifyError::InvalidK { k, n });
        }
        let scaler = MinMaxScaler::fit(train);
        Ok(Self {
            k,
            train: scaler.transform(train, false),
            labels: train.labels().to_vec(),
        })
    }

    /// Labels one raw (unscaled) row; the query is scaled with the training
    /// bounds and clamped to [0,1].
    pub fn predict_row(&self, row: &[f64]) -> Result<ClassId, ClassifyError> {
        let m = self.train.n_cols;
        if row.len() != m {
            return Err(ClassifyError::WidthMismatch {
                expected: m,
                found: row.len(),
            });
        }
        let scaler = &self.train.scaler;
        let query: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, &x)| scaler.scale(j, x).clamp(0.0, 1.0))
            .collect();
        let mut dist: Vec<(f64, usize)> = (0..self.train.n_rows)
            .map(|i| {
                let d: f64 = self
                    .train
                    .row(i)
                    .iter()
                    .zip(&query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d, i)
            })
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_distance);
        }
        let mut votes: BTreeMap<ClassId, usize> = BTreeMap::new();
        for &(_, i) in &dist[..k] {
            *votes.entry(self.labels[i]).or_insert(0) += 1;
        }
        let mut winner = (0, 0);
        for (class, n) in votes {
            // ascending class order, so strict > keeps the smallest tied id
            if n > winner.1 {
                winner = (class, n);
            }
        }
        Ok(winner.0)
    }

    pub fn predict(&self, test: &NumericDataset) -> Result<Vec<ClassId>, ClassifyError> {
        (0..test.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(test.row(i)))
            .collect()
    }
}

/// Majority label among the `k` nearest training rows (Euclidean distance
/// on training-scaled features; distance ties favour the earlier training
/// row, vote ties the smallest class id).
pub fn knn_predict(
    train: &NumericDataset,
    test: &NumericDataset,
    k: usize,
) -> Result<Vec<ClassId>, ClassifyError> {
    KnnModel::fit(train, k)?.predict(test)
}
