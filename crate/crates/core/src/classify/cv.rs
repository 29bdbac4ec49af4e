//! Stratified k-fold cross-validation of a classifier on a feature subset.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
use super::{project, Classifier, ClassifyError};
use crate::dataset::{kfold_indices, ClassId, NumericDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub validation_size: usize,
    /// The training part held a single class; the fold is still evaluated.
    pub single_class: bool,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
}

impl FoldReport {
    /// The fold's accuracy: the support-weighted per-class accuracy.
    pub fn accuracy(&self) -> f64 {
        self.report.weighted.accuracy
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: String,
    pub selected: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    /// Metrics of the confusion matrices summed over all folds.
    pub pooled: MetricsReport,
    pub pooled_confusion: ConfusionMatrix,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
}

/// Trains on k−1 folds and scores the held-out fold, k times. Folds run in
/// parallel and are reported in fold order.
pub fn cross_validate(
    ds: &NumericDataset,
    selected: &[usize],
    classifier: &dyn Classifier,
    k: usize,
    seed: u64,
) -> Result<CvReport, ClassifyError> {
    let projected = project(ds, selected)?;
    let classes: Vec<ClassId> = ds.schema().class_ids().into_iter().collect();
    let folds = kfold_indices(projected.labels(), k, seed)?;
    let reports: Vec<FoldReport> = folds
        .par_iter()
        .enumerate()
        .map(|(fold, idx)| {
            let train = projected.subset(&idx.train);
            let validation = projected.subset(&idx.validation);
            let single_class = train.class_counts().len() < 2;
            if single_class {
                warn!("fold {fold}: training part holds a single class");
            }
            let predicted = classifier.fit_predict(&train, &validation)?;
            let cm = confusion(&classes, validation.labels(), &predicted)?;
            Ok(FoldReport {
                fold,
                train_size: train.n_rows(),
                validation_size: validation.n_rows(),
                single_class,
                report: metrics(&cm),
                confusion: cm,
            })
        })
        .collect::<Result<_, ClassifyError>>()?;

    let mut pooled_confusion = ConfusionMatrix::new(&classes);
    for f in &reports {
        pooled_confusion.merge(&f.confusion);
    }
    let accuracies: Vec<f64> = reports.iter().map(FoldReport::accuracy).collect();
    let mean_accuracy = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let min_accuracy = accuracies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut selected = selected.to_vec();
    selected.sort_unstable();
    selected.dedup();
    Ok(CvReport {
        classifier: classifier.name(),
        selected,
        k,
        seed,
        folds: reports,
        pooled: metrics(&pooled_confusion),
        pooled_confusion,
        mean_accuracy,
        min_accuracy,
    })
}
