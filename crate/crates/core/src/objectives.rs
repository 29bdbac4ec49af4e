//! Chromosome decoding and the three maximized objectives of each model:
//! selected-set dissimilarity, non-selected coverage and dispersion.
//!
//! Evaluation reads nothing but a [`MeasureCache`]; class labels never
//! reach this module.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::measures::MeasureCache;

/// Division guard for reciprocal and averaged objectives.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ObjectiveError {
    #[error("unknown model token {0:?} (expected model1a, model1b, model2, model3a, model3b, model4, model5a, model5b or model6)")]
    UnknownModel(String),
    #[error("invalid chromosome string {0:?}")]
    BadBits(String),
}

/// Feature mask: bit `i` set means feature `i` is selected.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    bits: Vec<bool>,
}

impl Chromosome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self::new(vec![true; len])
    }

    pub fn from_indices(len: usize, selected: &[usize]) -> Self {
        let mut ch = Self::zeros(len);
        for &i in selected {
            ch.bits[i] = true;
        }
        ch
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn count_selected(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn selected(&self) -> Vec<usize> {
        self.decode().0
    }

    /// Splits the mask into (selected, non-selected) index lists.
    pub fn decode(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.bits.len()).partition(|&i| self.bits[i])
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// True when at least two features are selected and one left out.
    pub fn is_valid(&self) -> bool {
        let k = self.count_selected();
        k >= 2 && k < self.len()
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Chromosome {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(ObjectiveError::BadBits(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Chromosome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn decode(ch: &Chromosome) -> (Vec<usize>, Vec<usize>) {
    ch.decode()
}

/// Forces `2 <= |SF| <= M - 1`: sets random 0-bits while fewer than two
/// features are selected, then clears one random 1-bit if none is left out.
/// Valid chromosomes come back untouched and consume no randomness.
pub fn repair<R: Rng + ?Sized>(mut ch: Chromosome, rng: &mut R) -> Chromosome {
    while ch.count_selected() < 2 {
        let zeros: Vec<usize> = (0..ch.len()).filter(|&i| !ch.get(i)).collect();
        match zeros.choose(rng) {
            Some(&i) => ch.flip(i),
            None => break,
        }
    }
    if ch.count_selected() == ch.len() && ch.len() > 2 {
        let i = rng.gen_range(0..ch.len());
        ch.flip(i);
    }
    ch
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Nmi,
    Ig,
    Pcc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dispersion {
    Sd,
    Entropy,
}

/// CLI token naming one of the nine model variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelToken {
    Model1a,
    Model1b,
    Model2,
    Model3a,
    Model3b,
    Model4,
    Model5a,
    Model5b,
    Model6,
}

impl ModelToken {
    pub const ALL: [ModelToken; 9] = [
        ModelToken::Model1a,
        ModelToken::Model1b,
        ModelToken::Model2,
        ModelToken::Model3a,
        ModelToken::Model3b,
        ModelToken::Model4,
        ModelToken::Model5a,
        ModelToken::Model5b,
        ModelToken::Model6,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelToken::Model1a => "model1a",
            ModelToken::Model1b => "model1b",
            ModelToken::Model2 => "model2",
            ModelToken::Model3a => "model3a",
            ModelToken::Model3b => "model3b",
            ModelToken::Model4 => "model4",
            ModelToken::Model5a => "model5a",
            ModelToken::Model5b => "model5b",
            ModelToken::Model6 => "model6",
        }
    }

    pub fn similarity(self) -> Similarity {
        use ModelToken::*;
        match self {
            Model1a | Model1b | Model2 => Similarity::Nmi,
            Model3a | Model3b | Model4 => Similarity::Ig,
            Model5a | Model5b | Model6 => Similarity::Pcc,
        }
    }

    pub fn dispersion(self) -> Dispersion {
        use ModelToken::*;
        match self {
            Model2 | Model4 | Model6 => Dispersion::Entropy,
            _ => Dispersion::Sd,
        }
    }

    /// The (b) variants leave some features out of the SD average.
    pub fn uses_sd_exclusions(self) -> bool {
        matches!(
            self,
            ModelToken::Model1b | ModelToken::Model3b | ModelToken::Model5b
        )
    }
}

impl fmt::Display for ModelToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelToken {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelToken::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ObjectiveError::UnknownModel(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveModel {
    pub similarity: Similarity,
    pub dispersion: Dispersion,
    /// Features ignored by the SD objective; empty unless `dispersion == Sd`.
    pub sd_exclusions: BTreeSet<usize>,
}

impl ObjectiveModel {
    /// Builds the model for `token`; `sd_exclusions` is used by the (b)
    /// variants only and ignored otherwise.
    pub fn from_token(token: ModelToken, sd_exclusions: &BTreeSet<usize>) -> Self {
        Self {
            similarity: token.similarity(),
            dispersion: token.dispersion(),
            sd_exclusions: if token.uses_sd_exclusions() {
                sd_exclusions.clone()
            } else {
                BTreeSet::new()
            },
        }
    }

    /// Pairwise redundancy score between two features.
    pub fn pair_similarity(&self, cache: &MeasureCache, i: usize, j: usize) -> f64 {
        match self.similarity {
            Similarity::Nmi => cache.nmi[i][j],
            Similarity::Ig => 0.5 * (cache.ig[i][j] + cache.ig[j][i]),
            Similarity::Pcc => cache.pcc[i][j].abs(),
        }
    }
}

/// Three objectives, all maximized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Reciprocal of the mean pairwise similarity inside the selected set.
    pub f_sel: f64,
    /// Mean similarity of each left-out feature to its nearest selected one.
    pub f_unsel: f64,
    /// Mean standard deviation (or entropy) of the selected features.
    pub f_disp: f64,
}

impl ObjectiveVector {
    pub fn new(f_sel: f64, f_unsel: f64, f_disp: f64) -> Self {
        Self {
            f_sel,
            f_unsel,
            f_disp,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.f_sel, self.f_unsel, self.f_disp]
    }

    pub fn get(&self, k: usize) -> f64 {
        self.as_array()[k]
    }
}

pub fn f_selected_dissimilarity(
    selected: &[usize],
    model: &ObjectiveModel,
    cache: &MeasureCache,
) -> f64 {
    let k = selected.len();
    if k < 2 {
        return 1.0 / EPSILON;
    }
    // summed in ascending index order so the value is permutation-invariant
    let mut order = selected.to_vec();
    order.sort_unstable();
    let mut sum = 0.0;
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            sum += model.pair_similarity(cache, i, j);
        }
    }
    let avg = 2.0 * sum / (k * (k - 1)) as f64;
    1.0 / avg.max(EPSILON)
}

/// Nearest selected feature by column distance; ties go to the smaller index.
pub fn nearest_selected(i: usize, selected: &[usize], cache: &MeasureCache) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &j in selected {
        let d = cache.feat_dist[i][j];
        let better = match best {
            None => true,
            Some((bd, bj)) => d < bd || (d == bd && j < bj),
        };
        if better {
            best = Some((d, j));
        }
    }
    best.map(|(_, j)| j)
}

pub fn f_unselected_coverage(
    selected: &[usize],
    unselected: &[usize],
    model: &ObjectiveModel,
    cache: &MeasureCache,
) -> f64 {
    if selected.is_empty() || unselected.is_empty() {
        return 0.0;
    }
    let sum: f64 = unselected
        .iter()
        .map(|&i| {
            let j = nearest_selected(i, selected, cache).expect("selected set is non-empty");
            model.pair_similarity(cache, i, j)
        })
        .sum();
    sum / unselected.len() as f64
}

pub fn f_dispersion(selected: &[usize], model: &ObjectiveModel, cache: &MeasureCache) -> f64 {
    let values: Vec<f64> = match model.dispersion {
        Dispersion::Sd => selected
            .iter()
            .filter(|i| !model.sd_exclusions.contains(i))
            .map(|&i| cache.std_dev[i])
            .collect(),
        Dispersion::Entropy => selected.iter().map(|&i| cache.entropy[i]).collect(),
    };
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn evaluate(ch: &Chromosome, model: &ObjectiveModel, cache: &MeasureCache) -> ObjectiveVector {
    let (selected, unselected) = ch.decode();
    ObjectiveVector {
        f_sel: f_selected_dissimilarity(&selected, model, cache),
        f_unsel: f_unselected_coverage(&selected, &unselected, model, cache),
        f_disp: f_dispersion(&selected, model, cache),
    }
}
