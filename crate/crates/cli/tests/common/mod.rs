//! Synthetic data shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moofs_core::dataset::{ClassId, FeatureSchema, NumericDataset};

/// Feature groups of the planted dataset: a signal and its two near-copies.
pub const GROUPS: [[usize; 3]; 4] = [[0, 4, 8], [1, 5, 9], [2, 6, 10], [3, 7, 11]];

pub fn group_of(feature: usize) -> usize {
    feature % 4
}

/// Twelve columns: four independent uniform signals with widely different
/// spreads (features 0–3), then two near-duplicates of each (4–7 and 8–11).
/// The class is 2 when the first two signals are both above their median.
pub fn planted_rows(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<ClassId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spreads = [100.0, 200.0, 300.0, 400.0];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let s: Vec<f64> = spreads.iter().map(|w| rng.gen::<f64>() * w).collect();
        let mut row = s.clone();
        for k in 0..4 {
            row.push(s[k] + rng.gen_range(-0.005..0.005) * spreads[k]);
        }
        for k in 0..4 {
            row.push(0.98 * s[k] + rng.gen_range(-0.005..0.005) * spreads[k]);
        }
        labels.push(if s[0] > 50.0 && s[1] > 100.0 { 2 } else { 1 });
        rows.push(row);
    }
    (rows, labels)
}

pub fn planted_dataset(n: usize, seed: u64) -> NumericDataset {
    let (rows, labels) = planted_rows(n, seed);
    NumericDataset::from_rows(&rows, &labels).unwrap()
}

/// Writes the planted data as a raw headerless CSV plus a schema JSON.
pub fn write_planted_raw(dir: &Path, name: &str, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (rows, labels) = planted_rows(n, seed);
    write_raw(dir, name, &rows, &labels)
}

pub fn write_raw(dir: &Path, name: &str, rows: &[Vec<f64>], labels: &[ClassId]) -> (PathBuf, PathBuf) {
    let mut text = String::new();
    for (row, label) in rows.iter().zip(labels) {
        for v in row {
            write!(text, "{v},").unwrap();
        }
        writeln!(text, "{label}").unwrap();
    }
    let data = dir.join(name);
    fs::write(&data, text).unwrap();
    let schema = dir.join("schema.json");
    fs::write(&schema, FeatureSchema::anonymous(rows[0].len(), &[1, 2]).to_json()).unwrap();
    (data, schema)
}
