//! Supervised validation of selected feature subsets: projection, a CART
//! decision tree, k-nearest neighbours, confusion-matrix metrics, stratified
//! cross-validation and Welch's t-test.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ClassId, DatasetError, NumericDataset};

pub mod cv;
pub mod knn;
pub mod metrics;
pub mod tree;
pub mod ttest;

pub use cv::{cross_validate, CvReport, FoldReport};
pub use knn::{knn_predict, KnnModel};
pub use metrics::{confusion, metrics, weighted_average, ClassMetrics, ConfusionMatrix, MetricFlag, MetricsReport, WeightedMetrics};
pub use tree::{predict_tree, train_tree, TreeModel, TreeParams};
pub use ttest::{t_test, TTest};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("row width {found} does not match training width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("class {0} is not in the class set")]
    UnknownClass(ClassId),
    #[error("k = {k} is invalid for {n} training rows")]
    InvalidK { k: usize, n: usize },
    #[error("unknown classifier '{0}' (expected dtree or knn<k>)")]
    UnknownClassifier(String),
    #[error("t-test needs at least 2 values per sample, got {0} and {1}")]
    TooFewSamples(usize, usize),
    #[error("both samples have zero variance; t is undefined")]
    ZeroVariance,
    #[error("statistics error: {0}")]
    Statistics(String),
}

/// Restricts `ds` to the columns in `selected` (ascending original order).
pub fn project(ds: &NumericDataset, selected: &[usize]) -> Result<NumericDataset, ClassifyError> {
    Ok(ds.select_features(selected)?)
}

/// Extension point for classifiers: train on one dataset, label another.
pub trait Classifier: Send + Sync {
    fn name(&self) -> String;

    fn fit_predict(
        &self,
        train: &NumericDataset,
        test: &NumericDataset,
    ) -> Result<Vec<ClassId>, ClassifyError>;
}

/// The built-in classifiers, addressable by token (`dtree`, `knn5`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSpec {
    DecisionTree(TreeParams),
    Knn { k: usize },
}

impl Classifier for ClassifierSpec {
    fn name(&self) -> String {
        self.to_string()
    }

    fn fit_predict(
        &self,
        train: &NumericDataset,
        test: &NumericDataset,
    ) -> Result<Vec<ClassId>, ClassifyError> {
        match self {
            Self::DecisionTree(params) => {
                let model = train_tree(train, params)?;
                predict_tree(&model, test.rows())
            }
            Self::Knn { k } => knn_predict(train, test, *k),
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DecisionTree(_) => f.write_str("dtree"),
            Self::Knn { k } => write!(f, "knn{k}"),
        }
    }
}

impl FromStr for ClassifierSpec {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token = s.trim().to_ascii_lowercase();
        if token == "dtree" {
            return Ok(Self::DecisionTree(TreeParams::default()));
        }
        match token.strip_prefix("knn").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 1 => Ok(Self::Knn { k }),
            _ => Err(ClassifyError::UnknownClassifier(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_examples() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..41).map(|j| (i * 41 + j) as f64).collect())
            .collect();
        let ds = NumericDataset::from_rows(&rows, &[1, 2, 1]).unwrap();
        let subset = [0, 1, 2, 3, 4, 5, 6, 7, 9, 12, 14, 15, 16, 21, 22, 23, 28, 29, 36, 37, 39];
        let p = project(&ds, &subset).unwrap();
        assert_eq!(p.n_features(), 21);
        assert_eq!(p.row(1)[8], 41.0 + 9.0);
        assert_eq!(p.labels(), ds.labels());

        let all: Vec<usize> = (0..41).collect();
        assert_eq!(project(&ds, &all).unwrap().values(), ds.values());
        assert_eq!(project(&ds, &[0]).unwrap().n_features(), 1);
        assert!(project(&ds, &[41]).is_err());
        assert!(project(&ds, &[]).is_err());
    }

    #[test]
    fn unordered_projection_is_sorted() {
        let ds = NumericDataset::from_rows(&[vec![1.0, 2.0, 3.0]], &[1]).unwrap();
        assert_eq!(project(&ds, &[2, 0]).unwrap().row(0), &[1.0, 3.0]);
    }

    #[test]
    fn classifier_tokens() {
        assert_eq!("dtree".parse::<ClassifierSpec>().unwrap().to_string(), "dtree");
        assert_eq!("knn5".parse::<ClassifierSpec>().unwrap(), ClassifierSpec::Knn { k: 5 });
        assert_eq!("KNN1".parse::<ClassifierSpec>().unwrap(), ClassifierSpec::Knn { k: 1 });
        for bad in ["svm", "knn", "knn0", "knnx"] {
            assert!(bad.parse::<ClassifierSpec>().is_err(), "{bad}");
        }
    }
}
