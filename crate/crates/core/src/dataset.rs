//! Connection-record ingestion: schema-driven CSV loading, categorical and
//! label encoding, min-max scaling and stratified partitioning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod builtin;

/// Class identifier. Encoded classes start at 1; binarized datasets use 0/1.
pub type ClassId = u32;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: file contains no records")]
    Empty(PathBuf),
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unexpected header row (first cell {cell:?}); schema declares a headerless file")]
    UnexpectedHeader { line: usize, cell: String },
    #[error("line {line}: unknown class label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: cannot parse {cell:?} in continuous feature {feature:?}")]
    Parse {
        line: usize,
        feature: String,
        cell: String,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid schema JSON: {0}")]
    SchemaJson(#[from] serde_json::Error),
    #[error("unknown class id {0}")]
    UnknownClass(ClassId),
    #[error("invalid partition request: {0}")]
    Partition(String),
    #[error("dataset shape mismatch: {0}")]
    Shape(String),
    #[error("malformed delimited record: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// What to do with a record whose label is not in the label map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownLabelPolicy {
    #[default]
    Error,
    Drop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Encoding table for categorical features (raw string -> code >= 1).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub codes: BTreeMap<String, u32>,
}

impl FeatureSpec {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            codes: BTreeMap::new(),
        }
    }

    pub fn categorical(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            codes: BTreeMap::new(),
        }
    }

    pub fn with_codes(mut self, codes: &[(&str, u32)]) -> Self {
        self.codes = codes.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }
}

fn default_delimiter() -> char {
    ','
}

/// Column layout, feature kinds, categorical tables and the label map of a
/// headerless connection-record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub has_header: bool,
    pub features: Vec<FeatureSpec>,
    /// Zero-based column of the class label in the raw file.
    pub label_column: usize,
    /// Raw columns ignored entirely (e.g. the NSL-KDD difficulty score).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skip_columns: Vec<usize>,
    pub label_map: BTreeMap<String, ClassId>,
    #[serde(default)]
    pub class_names: BTreeMap<ClassId, String>,
    #[serde(default)]
    pub unknown_labels: UnknownLabelPolicy,
    /// Feature names left out of the standard-deviation objective in the (b) model variants.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sd_exclusions: Vec<String>,
}

impl FeatureSchema {
    /// A schema for an already-numeric matrix: features `f0..f{m-1}`, all
    /// continuous, label in the last column, classes named by their id.
    pub fn anonymous(n_features: usize, classes: &[ClassId]) -> Self {
        Self {
            name: "anonymous".to_string(),
            delimiter: ',',
            has_header: false,
            features: (0..n_features)
                .map(|j| FeatureSpec::continuous(&format!("f{j}")))
                .collect(),
            label_column: n_features,
            skip_columns: Vec::new(),
            label_map: classes.iter().map(|c| (c.to_string(), *c)).collect(),
            class_names: classes.iter().map(|c| (*c, c.to_string())).collect(),
            unknown_labels: UnknownLabelPolicy::Error,
            sd_exclusions: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_columns(&self) -> usize {
        self.features.len() + 1 + self.skip_columns.len()
    }

    /// Raw column index of each feature, in feature order.
    pub fn feature_columns(&self) -> Vec<usize> {
        (0..self.n_columns())
            .filter(|c| *c != self.label_column && !self.skip_columns.contains(c))
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.features.iter().map(|f| f.kind).collect()
    }

    /// Indices of the features named in `sd_exclusions`.
    pub fn sd_exclusion_indices(&self) -> Result<BTreeSet<usize>, DatasetError> {
        self.sd_exclusions
            .iter()
            .map(|name| {
                self.feature_index(name).ok_or_else(|| {
                    DatasetError::Schema(format!("sd_exclusions names unknown feature {name:?}"))
                })
            })
            .collect()
    }

    pub fn class_ids(&self) -> BTreeSet<ClassId> {
        self.label_map.values().copied().collect()
    }

    pub fn class_name(&self, class: ClassId) -> String {
        self.class_names
            .get(&class)
            .cloned()
            .unwrap_or_else(|| class.to_string())
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let err = |msg: String| Err(DatasetError::Schema(msg));
        if self.features.is_empty() {
            return err("schema declares no features".into());
        }
        let mut names = BTreeSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return err(format!("duplicate feature name {:?}", f.name));
            }
            if f.kind == FeatureKind::Continuous && !f.codes.is_empty() {
                return err(format!("continuous feature {:?} has an encoding table", f.name));
            }
            let mut seen = BTreeSet::new();
            for (k, code) in &f.codes {
                if *code == 0 {
                    return err(format!("feature {:?}: code 0 is reserved ({k:?})", f.name));
                }
                if !seen.insert(*code) {
                    return err(format!("feature {:?}: code {code} assigned twice", f.name));
                }
            }
        }
        let n_cols = self.n_columns();
        if self.label_column >= n_cols {
            return err(format!(
                "label_column {} outside {} columns",
                self.label_column, n_cols
            ));
        }
        let skips: BTreeSet<_> = self.skip_columns.iter().collect();
        if skips.len() != self.skip_columns.len() {
            return err("skip_columns has duplicates".into());
        }
        if skips.contains(&self.label_column) {
            return err("label_column is also listed in skip_columns".into());
        }
        if self.skip_columns.iter().any(|c| *c >= n_cols) {
            return err("skip column outside the record".into());
        }
        if self.label_map.is_empty() {
            return err("label_map is empty".into());
        }
        self.sd_exclusion_indices()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RawRow {
    /// 1-based line number in the source file.
    pub line: usize,
    pub cells: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RawDataset {
    pub schema: FeatureSchema,
    pub rows: Vec<RawRow>,
}

fn delimiter_byte(schema: &FeatureSchema) -> Result<u8, DatasetError> {
    u8::try_from(schema.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| DatasetError::Schema(format!("delimiter {:?} is not ASCII", schema.delimiter)))
}

/// Parses a delimited connection-record file into raw string cells.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<RawDataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw = parse_records(&text, schema)?;
    if raw.rows.is_empty() {
        return Err(DatasetError::Empty(path.to_path_buf()));
    }
    Ok(raw)
}

/// In-memory variant of [`load_csv`]; an empty result is not an error here.
pub fn parse_records(text: &str, schema: &FeatureSchema) -> Result<RawDataset, DatasetError> {
    schema.validate()?;
    let expected = schema.n_columns();
    let first_continuous = schema
        .feature_columns()
        .into_iter()
        .zip(&schema.features)
        .find(|(_, f)| f.kind == FeatureKind::Continuous)
        .map(|(c, _)| c);

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema)?)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        if cells.len() != expected {
            return Err(DatasetError::ColumnCount {
                line: line_no,
                expected,
                found: cells.len(),
            });
        }
        if rows.is_empty() && !schema.has_header {
            if let Some(col) = first_continuous {
                if cells[col].parse::<f64>().is_err() {
                    return Err(DatasetError::UnexpectedHeader {
                        line: line_no,
                        cell: cells[0].clone(),
                    });
                }
            }
        }
        rows.push(RawRow {
            line: line_no,
            cells,
        });
    }
    Ok(RawDataset {
        schema: schema.clone(),
        rows,
    })
}

/// Dense row-major feature matrix with class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericDataset {
    values: Vec<f64>,
    n_rows: usize,
    labels: Vec<ClassId>,
    schema: FeatureSchema,
}

impl NumericDataset {
    pub fn new(
        schema: FeatureSchema,
        values: Vec<f64>,
        labels: Vec<ClassId>,
    ) -> Result<Self, DatasetError> {
        let m = schema.n_features();
        if values.len() != labels.len() * m {
            return Err(DatasetError::Shape(format!(
                "{} values for {} rows of {} features",
                values.len(),
                labels.len(),
                m
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(DatasetError::Shape(format!("non-finite value {bad}")));
        }
        let classes = schema.class_ids();
        if let Some(bad) = labels.iter().find(|l| !classes.contains(l)) {
            return Err(DatasetError::UnknownClass(*bad));
        }
        Ok(Self {
            n_rows: labels.len(),
            values,
            labels,
            schema,
        })
    }

    /// Builds a dataset with an [`FeatureSchema::anonymous`] schema.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[ClassId]) -> Result<Self, DatasetError> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(DatasetError::Shape("ragged rows".into()));
        }
        let classes: BTreeSet<ClassId> = labels.iter().copied().collect();
        let classes: Vec<ClassId> = classes.into_iter().collect();
        Self::new(
            FeatureSchema::anonymous(m, &classes),
            rows.concat(),
            labels.to_vec(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; a zero-width dataset has no meaningful rows
        self.values.chunks_exact(self.n_features().max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let m = self.n_features();
        (0..self.n_rows).map(|i| self.values[i * m + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_features()).map(|j| self.column(j)).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(*l).or_insert(0) += 1;
        }
        counts
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let m = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * m);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            values,
            n_rows: indices.len(),
            labels,
            schema: self.schema.clone(),
        }
    }

    /// Columns at `features` (ascending, deduplicated), labels untouched.
    pub fn select_features(&self, features: &[usize]) -> Result<Self, DatasetError> {
        let m = self.n_features();
        let keep: Vec<usize> = features
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if keep.is_empty() {
            return Err(DatasetError::Shape("empty feature selection".into()));
        }
        if let Some(bad) = keep.iter().find(|&&j| j >= m) {
            return Err(DatasetError::Shape(format!(
                "feature index {bad} out of range for {m} features"
            )));
        }
        let mut schema = self.schema.clone();
        schema.features = keep.iter().map(|&j| self.schema.features[j].clone()).collect();
        schema.label_column = keep.len();
        schema.skip_columns.clear();
        schema.sd_exclusions.retain(|n| schema.features.iter().any(|f| &f.name == n));
        let mut values = Vec::with_capacity(self.n_rows * keep.len());
        for row in self.rows() {
            values.extend(keep.iter().map(|&j| row[j]));
        }
        Ok(Self {
            values,
            n_rows: self.n_rows,
            labels: self.labels.clone(),
            schema,
        })
    }

    pub fn with_labels(&self, labels: Vec<ClassId>, schema: FeatureSchema) -> Self {
        assert_eq!(labels.len(), self.n_rows);
        Self {
            values: self.values.clone(),
            n_rows: self.n_rows,
            labels,
            schema,
        }
    }
}

fn strip_label(raw: &str) -> &str {
    raw.trim().trim_end_matches('.')
}

/// Encodes a raw dataset, registering unseen categories on first sight
/// (1-based, in file order, after any codes the schema already carries).
pub fn encode(raw: &RawDataset) -> Result<NumericDataset, DatasetError> {
    encode_inner(raw, raw.schema.clone(), true)
}

/// Encodes with the tables of an already-trained schema; categories never
/// seen in training map to code 0.
pub fn encode_frozen(
    raw: &RawDataset,
    trained: &FeatureSchema,
) -> Result<NumericDataset, DatasetError> {
    if trained.n_columns() != raw.schema.n_columns() {
        return Err(DatasetError::Schema(
            "trained schema has a different column layout".into(),
        ));
    }
    encode_inner(raw, trained.clone(), false)
}

fn encode_inner(
    raw: &RawDataset,
    mut schema: FeatureSchema,
    learn: bool,
) -> Result<NumericDataset, DatasetError> {
    let columns = schema.feature_columns();
    let m = schema.n_features();
    let mut next_code: Vec<u32> = schema
        .features
        .iter()
        .map(|f| f.codes.values().max().map_or(1, |c| c + 1))
        .collect();
    let mut unseen: BTreeMap<String, usize> = BTreeMap::new();
    let mut dropped = 0usize;

    let mut values = Vec::with_capacity(raw.rows.len() * m);
    let mut labels = Vec::with_capacity(raw.rows.len());
    for row in &raw.rows {
        let label_raw = strip_label(&row.cells[schema.label_column]);
        let class = match schema.label_map.get(label_raw) {
            Some(c) => *c,
            None => match schema.unknown_labels {
                UnknownLabelPolicy::Error => {
                    return Err(DatasetError::UnknownLabel {
                        line: row.line,
                        label: label_raw.to_string(),
                    })
                }
                UnknownLabelPolicy::Drop => {
                    dropped += 1;
                    continue;
                }
            },
        };
        for (j, &col) in columns.iter().enumerate() {
            let cell = row.cells[col].as_str();
            let feature = &mut schema.features[j];
            let v = match feature.kind {
                FeatureKind::Continuous => {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DatasetError::Parse {
                            line: row.line,
                            feature: feature.name.clone(),
                            cell: cell.to_string(),
                        })?
                }
                FeatureKind::Categorical => match feature.codes.get(cell) {
                    Some(code) => f64::from(*code),
                    None if learn => {
                        let code = next_code[j];
                        next_code[j] += 1;
                        feature.codes.insert(cell.to_string(), code);
                        f64::from(code)
                    }
                    None => {
                        *unseen.entry(format!("{}={cell}", feature.name)).or_insert(0) += 1;
                        0.0
                    }
                },
            };
            values.push(v);
        }
        labels.push(class);
    }
    if dropped > 0 {
        info!("dropped {dropped} records with labels outside the label map");
    }
    for (what, n) in &unseen {
        warn!("category {what} unseen in training ({n} rows); encoded as 0");
    }
    NumericDataset::new(schema, values, labels)
}

/// Per-column min/max record used to scale training and test data alike.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(ds: &NumericDataset) -> Self {
        let m = ds.n_features();
        let mut mins = vec![f64::INFINITY; m];
        let mut maxs = vec![f64::NEG_INFINITY; m];
        for row in ds.rows() {
            for j in 0..m {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        }
        if ds.n_rows() == 0 {
            mins.fill(0.0);
            maxs.fill(0.0);
        }
        Self { mins, maxs }
    }

    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let range = self.maxs[j] - self.mins[j];
        if range > 0.0 {
            (x - self.mins[j]) / range
        } else {
            0.0
        }
    }

    pub fn unscale(&self, j: usize, y: f64) -> f64 {
        self.mins[j] + y * (self.maxs[j] - self.mins[j])
    }

    /// Scales every column; `clamp` pins out-of-range (test) values into [0,1].
    pub fn transform(&self, ds: &NumericDataset, clamp: bool) -> NormalizedView {
        let m = ds.n_features();
        assert_eq!(m, self.mins.len(), "scaler fitted on a different width");
        let values = ds
            .values()
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let y = self.scale(k % m, x);
                if clamp {
                    y.clamp(0.0, 1.0)
                } else {
                    y
                }
            })
            .collect();
        NormalizedView {
            values,
            n_rows: ds.n_rows(),
            n_cols: m,
            scaler: self.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedView {
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub scaler: MinMaxScaler,
}

impl NormalizedView {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.values[i * self.n_cols + j])
            .collect()
    }

    /// Maps scaled values back to original units.
    pub fn denormalize(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &y)| self.scaler.unscale(k % self.n_cols, y))
            .collect()
    }
}

pub fn normalize_minmax(ds: &NumericDataset) -> NormalizedView {
    MinMaxScaler::fit(ds).transform(ds, false)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Classes with a single sample; that sample always lands in `train`.
    pub singleton_classes: Vec<ClassId>,
}

fn indices_by_class(labels: &[ClassId]) -> BTreeMap<ClassId, Vec<usize>> {
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    by_class
}

/// Class-proportional holdout split. Each class with `n >= 2` samples sends
/// `round(n * test_fraction)` of them (at least 1, at most `n - 1`) to test.
pub fn stratified_split_indices(
    labels: &[ClassId],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::Partition(format!(
            "test fraction {test_fraction} outside (0,1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SplitIndices {
        train: Vec::new(),
        test: Vec::new(),
        singleton_classes: Vec::new(),
    };
    for (class, mut idx) in indices_by_class(labels) {
        let n = idx.len();
        if n == 1 {
            warn!("class {class} has a single sample; assigned to the training split");
            out.singleton_classes.push(class);
            out.train.push(idx[0]);
            continue;
        }
        idx.shuffle(&mut rng);
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        out.test.extend_from_slice(&idx[..n_test]);
        out.train.extend_from_slice(&idx[n_test..]);
    }
    out.train.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn stratified_split(
    ds: &NumericDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(NumericDataset, NumericDataset), DatasetError> {
    let split = stratified_split_indices(ds.labels(), test_fraction, seed)?;
    Ok((ds.subset(&split.train), ds.subset(&split.test)))
}

/// Exactly `n` row indices (ascending) drawn class-proportionally: each
/// class gets `floor(n * share)` rows, and the remaining slots go to the
/// classes with the largest fractional remainders (smaller id first on ties).
pub fn stratified_subsample_indices(
    labels: &[ClassId],
    n: usize,
    seed: u64,
) -> Result<Vec<usize>, DatasetError> {
    let total = labels.len();
    if n == 0 || n > total {
        return Err(DatasetError::Partition(format!(
            "cannot draw {n} rows from {total}"
        )));
    }
    let by_class = indices_by_class(labels);
    let mut quotas: Vec<(ClassId, usize, u128)> = by_class
        .iter()
        .map(|(&c, idx)| {
            let exact = idx.len() as u128 * n as u128;
            let q = (exact / total as u128) as usize;
            (c, q, exact % total as u128)
        })
        .collect();
    let mut left = n - quotas.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.cmp(&quotas[a].2).then(quotas[a].0.cmp(&quotas[b].0)));
    for i in order {
        if left == 0 {
            break;
        }
        if quotas[i].1 < by_class[&quotas[i].0].len() {
            quotas[i].1 += 1;
            left -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for (class, quota, _) in quotas {
        let mut idx = by_class[&class].clone();
        idx.shuffle(&mut rng);
        out.extend_from_slice(&idx[..quota]);
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold assignment: each class is shuffled, the classes are
/// concatenated in id order and dealt round-robin onto the folds, so fold
/// sizes differ by at most one and every class is spread evenly.
pub fn kfold_indices(
    labels: &[ClassId],
    k: usize,
    seed: u64,
) -> Result<Vec<FoldIndices>, DatasetError> {
    let n = labels.len();
    if k < 2 {
        return Err(DatasetError::Partition(format!("k = {k}; need k >= 2")));
    }
    if k > n {
        return Err(DatasetError::Partition(format!(
            "k = {k} exceeds the {n} available samples"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(n);
    for (_, mut idx) in indices_by_class(labels) {
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&i| fold_of[i] == f);
            FoldIndices { train, validation }
        })
        .collect())
}

pub fn kfold_partition(
    ds: &NumericDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<(NumericDataset, NumericDataset)>, DatasetError> {
    Ok(kfold_indices(ds.labels(), k, seed)?
        .into_iter()
        .map(|f| (ds.subset(&f.train), ds.subset(&f.validation)))
        .collect())
}

/// One-vs-rest relabeling: `positive_class` becomes 1, everything else 0.
pub fn binarize_labels(
    ds: &NumericDataset,
    positive_class: ClassId,
) -> Result<NumericDataset, DatasetError> {
    if !ds.schema().class_ids().contains(&positive_class) {
        return Err(DatasetError::UnknownClass(positive_class));
    }
    let labels: Vec<ClassId> = ds
        .labels()
        .iter()
        .map(|&l| ClassId::from(l == positive_class))
        .collect();
    if !labels.contains(&1) {
        warn!("positive class {positive_class} absent from data; all labels are 0");
    }
    let positive_name = ds.schema().class_name(positive_class);
    let mut schema = ds.schema().clone();
    schema.label_map = BTreeMap::from([("rest".to_string(), 0), (positive_name.clone(), 1)]);
    schema.class_names = BTreeMap::from([(0, "rest".to_string()), (1, positive_name)]);
    Ok(ds.with_labels(labels, schema))
}

/// Writes features then the label as a headed CSV of numbers.
pub fn write_encoded_csv(ds: &NumericDataset, path: &Path) -> Result<(), DatasetError> {
    let mut out = String::with_capacity(ds.n_rows() * (ds.n_features() + 1) * 4);
    out.push_str(&ds.schema().feature_names().join(","));
    out.push_str(",label\n");
    for (row, label) in ds.rows().zip(ds.labels()) {
        for v in row {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{label}");
    }
    fs::write(path, out).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file produced by [`write_encoded_csv`] back under `schema`.
pub fn read_encoded_csv(path: &Path, schema: &FeatureSchema) -> Result<NumericDataset, DatasetError> {
    let m = schema.n_features();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    if reader.headers()?.len() != m + 1 {
        return Err(DatasetError::Shape(format!(
            "{}: header does not have {} columns",
            path.display(),
            m + 1
        )));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != m + 1 {
            return Err(DatasetError::ColumnCount {
                line,
                expected: m + 1,
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().take(m).enumerate() {
            values.push(cell.parse::<f64>().map_err(|_| DatasetError::Parse {
                line,
                feature: schema.features[j].name.clone(),
                cell: cell.to_string(),
            })?);
        }
        labels.push(record[m].parse::<ClassId>().map_err(|_| DatasetError::UnknownLabel {
            line,
            label: record[m].to_string(),
        })?);
    }
    NumericDataset::new(schema.clone(), values, labels)
}
