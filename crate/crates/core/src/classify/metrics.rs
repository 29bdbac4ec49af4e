//! Confusion matrices and the one-vs-rest detection metrics derived from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::dataset::ClassId;

/// Rows are actual classes, columns predicted classes, both in `classes` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<ClassId>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Empty matrix over `classes` (sorted and deduplicated).
    pub fn new(classes: &[ClassId]) -> Self {
        let mut classes = classes.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let c = classes.len();
        Self {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_counts(classes: Vec<ClassId>, counts: Vec<Vec<u64>>) -> Result<Self, ClassifyError> {
        let c = classes.len();
        let mut sorted = classes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != classes || counts.len() != c || counts.iter().any(|r| r.len() != c) {
            return Err(ClassifyError::LengthMismatch {
                actual: c,
                predicted: counts.len(),
            });
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn position(&self, class: ClassId) -> Option<usize> {
        self.classes.binary_search(&class).ok()
    }

    pub fn record(&mut self, actual: ClassId, predicted: ClassId) -> Result<(), ClassifyError> {
        let a = self.position(actual).ok_or(ClassifyError::UnknownClass(actual))?;
        let p = self.position(predicted).ok_or(ClassifyError::UnknownClass(predicted))?;
        self.counts[a][p] += 1;
        Ok(())
    }

    /// Adds another matrix over the same classes.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.classes, other.classes, "class sets differ");
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, i: usize) -> u64 {
        self.counts.iter().map(|r| r[i]).sum()
    }

    pub fn supports(&self) -> Vec<u64> {
        (0..self.classes.len()).map(|i| self.row_sum(i)).collect()
    }

    pub fn tp(&self, i: usize) -> u64 {
        self.counts[i][i]
    }

    pub fn false_negatives(&self, i: usize) -> u64 {
        self.row_sum(i) - self.tp(i)
    }

    pub fn false_positives(&self, i: usize) -> u64 {
        self.col_sum(i) - self.tp(i)
    }

    pub fn true_negatives(&self, i: usize) -> u64 {
        self.total() + self.tp(i) - self.row_sum(i) - self.col_sum(i)
    }

    /// Aligned text table with class names as row and column headings.
    pub fn to_table(&self, name: impl Fn(ClassId) -> String) -> String {
        let names: Vec<String> = self.classes.iter().map(|&c| name(c)).collect();
        let width = names
            .iter()
            .map(String::len)
            .chain(self.counts.iter().flatten().map(|v| v.to_string().len()))
            .max()
            .unwrap_or(1)
            .max("actual\\pred".len());
        let mut out = format!("{:>width$}", "actual\\pred");
        for n in &names {
            write!(out, " {n:>width$}").unwrap();
        }
        out.push('\n');
        for (n, row) in names.iter().zip(&self.counts) {
            write!(out, "{n:>width$}").unwrap();
            for v in row {
                write!(out, " {v:>width$}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Tallies paired labels over the given class set.
pub fn confusion(
    classes: &[ClassId],
    actual: &[ClassId],
    predicted: &[ClassId],
) -> Result<ConfusionMatrix, ClassifyError> {
    if actual.len() != predicted.len() {
        return Err(ClassifyError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&a, &p) in actual.iter().zip(predicted) {
        cm.record(a, p)?;
    }
    Ok(cm)
}

/// Marks a metric whose denominator was zero and was reported as 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFlag {
    NoSupport,
    NoPositivePredictions,
    NoNegatives,
    ZeroPrecisionAndRecall,
}

/// One-vs-rest metrics for a class, as fractions in [0,1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassId,
    pub support: u64,
    pub accuracy: f64,
    pub detection_rate: f64,
    pub precision: f64,
    pub false_alarm_rate: f64,
    pub f_measure: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<MetricFlag>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub accuracy: f64,
    pub detection_rate: f64,
    pub precision: f64,
    pub false_alarm_rate: f64,
    pub f_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted averages of the per-class values.
    pub weighted: WeightedMetrics,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `Σ N_i·v_i / Σ N_i`; 0 when every support is 0.
pub fn weighted_average(values: &[f64], supports: &[u64]) -> f64 {
    assert_eq!(values.len(), supports.len());
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return 0.0;
    }
    values
        .iter()
        .zip(supports)
        .map(|(v, &n)| v * n as f64)
        .sum::<f64>()
        / total as f64
}

pub fn class_metrics(cm: &ConfusionMatrix, i: usize) -> ClassMetrics {
    let n = cm.total();
    let tp = cm.tp(i);
    let fn_ = cm.false_negatives(i);
    let fp = cm.false_positives(i);
    let tn = cm.true_negatives(i);
    let mut flags = Vec::new();
    let mut or_flag = |v: Option<f64>, flag| {
        v.unwrap_or_else(|| {
            flags.push(flag);
            0.0
        })
    };
    let detection_rate = or_flag(ratio(tp, tp + fn_), MetricFlag::NoSupport);
    let precision = or_flag(ratio(tp, tp + fp), MetricFlag::NoPositivePredictions);
    let false_alarm_rate = or_flag(ratio(fp, fp + tn), MetricFlag::NoNegatives);
    let accuracy = ratio(tp + tn, n).unwrap_or(0.0);
    let f_measure = if precision + detection_rate > 0.0 {
        2.0 * precision * detection_rate / (precision + detection_rate)
    } else {
        flags.push(MetricFlag::ZeroPrecisionAndRecall);
        0.0
    };
    ClassMetrics {
        class: cm.classes()[i],
        support: tp + fn_,
        accuracy,
        detection_rate,
        precision,
        false_alarm_rate,
        f_measure,
        flags,
    }
}

/// Per-class one-vs-rest metrics and their support-weighted averages.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = (0..cm.classes().len()).map(|i| class_metrics(cm, i)).collect();
    let supports: Vec<u64> = per_class.iter().map(|m| m.support).collect();
    let avg = |f: fn(&ClassMetrics) -> f64| {
        let values: Vec<f64> = per_class.iter().map(f).collect();
        weighted_average(&values, &supports)
    };
    let weighted = WeightedMetrics {
        accuracy: avg(|m| m.accuracy),
        detection_rate: avg(|m| m.detection_rate),
        precision: avg(|m| m.precision),
        false_alarm_rate: avg(|m| m.false_alarm_rate),
        f_measure: avg(|m| m.f_measure),
    };
    MetricsReport {
        total: cm.total(),
        per_class,
        weighted,
    }
}

impl MetricsReport {
    /// Aligned table in percent: Accuracy, Detection rate, Precision,
    /// False alarm rate, F-measure, one row per class plus the weighted row.
    pub fn to_table(&self, name: impl Fn(ClassId) -> String) -> String {
        let header = ["Accuracy", "Detection rate", "Precision", "False alarm rate", "F-measure"];
        let mut rows: Vec<(String, [f64; 5])> = self
            .per_class
            .iter()
            .map(|m| {
                (
                    name(m.class),
                    [m.accuracy, m.detection_rate, m.precision, m.false_alarm_rate, m.f_measure],
                )
            })
            .collect();
        let w = &self.weighted;
        rows.push((
            "Weighted average".to_string(),
            [w.accuracy, w.detection_rate, w.precision, w.false_alarm_rate, w.f_measure],
        ));
        let first = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("Class".len());
        let mut out = format!("{:<first$}", "Class");
        for h in header {
            write!(out, "  {h:>16}").unwrap();
        }
        out.push('\n');
        for (label, values) in rows {
            write!(out, "{label:<first$}").unwrap();
            for v in values {
                write!(out, "  {:>16.2}", 100.0 * v).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let cm = confusion(&[1, 2], &[1, 2, 2], &[1, 2, 2]).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 0], vec![0, 2]]);
        let cm = confusion(&[1, 2], &[1, 1, 2], &[1, 2, 2]).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1], vec![0, 1]]);
        assert!(matches!(
            confusion(&[1, 2], &[1, 3], &[1, 1]),
            Err(ClassifyError::UnknownClass(3))
        ));
        assert!(confusion(&[1], &[1], &[]).is_err());
    }

    #[test]
    fn probe_row_detection_rate() {
        // normal, dos, probe, u2r, r2l; only the probe row is filled in
        let mut counts = vec![vec![0u64; 5]; 5];
        counts[2] = vec![4, 4, 2369, 0, 0];
        let cm = ConfusionMatrix::from_counts(vec![1, 2, 3, 4, 5], counts).unwrap();
        let m = class_metrics(&cm, 2);
        assert_eq!(m.support, 2377);
        assert!((100.0 * m.detection_rate - 99.66).abs() < 0.005);
    }

    #[test]
    fn detection_rate_is_recall() {
        let mut counts = vec![vec![0u64; 2]; 2];
        counts[0] = vec![90, 10];
        counts[1] = vec![5, 95];
        let cm = ConfusionMatrix::from_counts(vec![0, 1], counts).unwrap();
        let m = class_metrics(&cm, 0);
        assert!((m.detection_rate - 0.90).abs() < 1e-15);
        assert!((m.precision - 90.0 / 95.0).abs() < 1e-15);
        assert!((m.false_alarm_rate - 0.05).abs() < 1e-15);
        assert!((m.accuracy - 185.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_accuracy_of_five_classes() {
        let acc = [99.32, 99.91, 99.87, 99.98, 99.43];
        let supports = [60593, 222200, 2377, 39, 5993];
        let w = weighted_average(&acc, &supports);
        assert!((w - 99.78).abs() < 0.01, "{w}");
    }

    #[test]
    fn f_measure_of_equal_precision_and_recall() {
        // symmetric errors give precision = recall for class 0
        let cm = ConfusionMatrix::from_counts(vec![0, 1], vec![vec![8, 2], vec![2, 8]]).unwrap();
        let m = class_metrics(&cm, 0);
        assert_eq!(m.precision, m.detection_rate);
        assert!((m.f_measure - m.precision).abs() < 1e-15);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        // class 1 never predicted, class 2 has no samples
        let cm = ConfusionMatrix::from_counts(vec![0, 1, 2], vec![vec![5, 0, 0], vec![3, 0, 0], vec![0, 0, 0]])
            .unwrap();
        let r = metrics(&cm);
        assert_eq!(r.per_class[1].precision, 0.0);
        assert!(r.per_class[1].flags.contains(&MetricFlag::NoPositivePredictions));
        assert!(r.per_class[1].flags.contains(&MetricFlag::ZeroPrecisionAndRecall));
        assert!(r.per_class[2].flags.contains(&MetricFlag::NoSupport));
        assert!(r.per_class.iter().all(|m| m.f_measure.is_finite()));
    }

    #[test]
    fn marginals() {
        let cm = ConfusionMatrix::from_counts(
            vec![1, 2, 3],
            vec![vec![5, 1, 0], vec![2, 7, 1], vec![0, 3, 4]],
        )
        .unwrap();
        assert_eq!(cm.total(), 23);
        for i in 0..3 {
            assert_eq!(cm.tp(i) + cm.false_negatives(i), cm.row_sum(i));
            assert_eq!(cm.false_positives(i) + cm.true_negatives(i), 23 - cm.row_sum(i));
        }
        let mut twice = cm.clone();
        twice.merge(&cm);
        assert_eq!(twice.total(), 46);
    }

    #[test]
    fn tables_render() {
        let cm = confusion(&[1, 2], &[1, 2], &[1, 1]).unwrap();
        let text = metrics(&cm).to_table(|c| format!("c{c}"));
        assert!(text.starts_with("Class"));
        assert!(text.contains("Weighted average"));
        assert!(text.contains("False alarm rate"));
        let grid = cm.to_table(|c| format!("c{c}"));
        assert_eq!(grid.lines().count(), 3);
    }
}
