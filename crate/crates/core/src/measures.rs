//! Histogram-based information measures (entropy, mutual information,
//! information gain), Pearson correlation, standard deviation, and the
//! pairwise [`MeasureCache`] the objective functions read from.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{FeatureKind, NormalizedView, NumericDataset};

pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("need at least 2 features, got {0}")]
    TooFewFeatures(usize),
    #[error("bin count must be >= 1")]
    ZeroBins,
    #[error("normalized view does not match the dataset ({0})")]
    Mismatch(String),
    #[error("cache file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache file {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cache file {path} was built for dataset {found_hash} / {found_bins} bins")]
    StaleCache {
        path: PathBuf,
        found_hash: String,
        found_bins: usize,
    },
}

/// A column mapped onto `levels` discrete symbols `0..levels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discretized {
    pub codes: Vec<u32>,
    pub levels: usize,
}

/// Categorical columns and columns with at most `bins` distinct values keep
/// their exact values; anything else goes into `bins` equal-width bins over
/// `[min, max]`.
pub fn discretize(column: &[f64], bins: usize, kind: FeatureKind) -> Discretized {
    let bins = bins.max(1);
    let mut distinct = column.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    if kind == FeatureKind::Categorical || distinct.len() <= bins {
        let codes = column
            .iter()
            .map(|x| {
                distinct
                    .binary_search_by(|probe| probe.total_cmp(x))
                    .expect("value present") as u32
            })
            .collect();
        return Discretized {
            codes,
            levels: distinct.len(),
        };
    }

    let min = distinct[0];
    let max = distinct[distinct.len() - 1];
    let width = max - min;
    let codes = column
        .iter()
        .map(|&x| {
            let b = ((x - min) / width * bins as f64).floor() as usize;
            b.min(bins - 1) as u32
        })
        .collect();
    Discretized { codes, levels: bins }
}

fn plogp_sum<I: IntoIterator<Item = u64>>(counts: I, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Shannon entropy in bits of an already-discretized column.
pub fn entropy_of_codes(d: &Discretized) -> f64 {
    let mut counts = vec![0u64; d.levels];
    for &c in &d.codes {
        counts[c as usize] += 1;
    }
    plogp_sum(counts, d.codes.len() as u64)
}

/// `H = -sum p log2 p` over the binned empirical distribution.
pub fn entropy(column: &[f64], bins: usize) -> f64 {
    entropy_of_codes(&discretize(column, bins, FeatureKind::Continuous))
}

/// Sparse joint histogram of two discretized columns.
#[derive(Clone, Debug)]
pub struct Contingency {
    /// Non-empty cells `(x, y, count)` sorted by `(x, y)`.
    cells: Vec<(u32, u32, u64)>,
    x_marginal: Vec<u64>,
    y_marginal: Vec<u64>,
    total: u64,
}

const DENSE_LIMIT: usize = 1 << 22;

impl Contingency {
    pub fn new(x: &Discretized, y: &Discretized) -> Self {
        assert_eq!(x.codes.len(), y.codes.len(), "columns of unequal length");
        let (nx, ny) = (x.levels, y.levels);
        let mut x_marginal = vec![0u64; nx];
        let mut y_marginal = vec![0u64; ny];
        for (&a, &b) in x.codes.iter().zip(&y.codes) {
            x_marginal[a as usize] += 1;
            y_marginal[b as usize] += 1;
        }
        let cells = if nx.saturating_mul(ny) <= DENSE_LIMIT {
            let mut dense = vec![0u64; nx * ny];
            for (&a, &b) in x.codes.iter().zip(&y.codes) {
                dense[a as usize * ny + b as usize] += 1;
            }
            dense
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| ((k / ny) as u32, (k % ny) as u32, c))
                .collect()
        } else {
            let mut sparse: HashMap<(u32, u32), u64> = HashMap::new();
            for (&a, &b) in x.codes.iter().zip(&y.codes) {
                *sparse.entry((a, b)).or_insert(0) += 1;
            }
            let mut cells: Vec<_> = sparse.into_iter().map(|((a, b), c)| (a, b, c)).collect();
            cells.sort_unstable();
            cells
        };
        Self {
            cells,
            x_marginal,
            y_marginal,
            total: x.codes.len() as u64,
        }
    }

    /// `I(X;Y) = sum p(x,y) log2 [p(x,y) / (p(x) p(y))]`.
    pub fn mutual_information(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mi: f64 = self
            .cells
            .iter()
            .map(|&(a, b, c)| {
                let c = c as f64;
                let cx = self.x_marginal[a as usize] as f64;
                let cy = self.y_marginal[b as usize] as f64;
                (c / n) * ((c * n) / (cx * cy)).log2()
            })
            .sum();
        mi.max(0.0)
    }

    pub fn entropy_x(&self) -> f64 {
        plogp_sum(self.x_marginal.iter().copied(), self.total)
    }

    pub fn entropy_y(&self) -> f64 {
        plogp_sum(self.y_marginal.iter().copied(), self.total)
    }

    /// Parent entropy of X minus the size-weighted entropies of the children
    /// obtained by partitioning the rows on Y.
    pub fn gain_x_given_y(&self) -> f64 {
        let mut by_y: Vec<(u32, u64)> = self.cells.iter().map(|&(_, b, c)| (b, c)).collect();
        // stable: within a child, x order is preserved
        by_y.sort_by_key(|&(b, _)| b);
        self.gain(self.entropy_x(), &by_y, &self.y_marginal)
    }

    pub fn gain_y_given_x(&self) -> f64 {
        let by_x: Vec<(u32, u64)> = self.cells.iter().map(|&(a, _, c)| (a, c)).collect();
        self.gain(self.entropy_y(), &by_x, &self.x_marginal)
    }

    fn gain(&self, parent: f64, grouped: &[(u32, u64)], child_sizes: &[u64]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mut children = 0.0;
        for group in grouped.chunk_by(|a, b| a.0 == b.0) {
            let size = child_sizes[group[0].0 as usize];
            children += (size as f64 / n) * plogp_sum(group.iter().map(|&(_, c)| c), size);
        }
        (parent - children).max(0.0)
    }
}

fn contingency(x: &[f64], y: &[f64], bins: usize) -> Contingency {
    Contingency::new(
        &discretize(x, bins, FeatureKind::Continuous),
        &discretize(y, bins, FeatureKind::Continuous),
    )
}

pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> f64 {
    contingency(x, y, bins).mutual_information()
}

/// `2 I(X;Y) / (H(X) + H(Y))`, or 0 when both entropies vanish.
pub fn normalized_mi(x: &[f64], y: &[f64], bins: usize) -> f64 {
    let t = contingency(x, y, bins);
    nmi_from(&t)
}

fn nmi_from(t: &Contingency) -> f64 {
    let denom = t.entropy_x() + t.entropy_y();
    if denom <= 0.0 {
        0.0
    } else {
        (2.0 * t.mutual_information() / denom).clamp(0.0, 1.0)
    }
}

/// `IG(target | given)`: entropy of `target` minus its expected entropy
/// after splitting rows on the bins of `given`.
pub fn information_gain(target: &[f64], given: &[f64], bins: usize) -> f64 {
    contingency(target, given, bins).gain_x_given_y()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Pearson correlation; 0 when either column has zero variance.
pub fn pcc(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "columns of unequal length");
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Population standard deviation (1/N under the root).
pub fn std_dev(column: &[f64]) -> f64 {
    if column.is_empty() {
        return 0.0;
    }
    let mu = mean(column);
    let var = column.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / column.len() as f64;
    var.sqrt()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Per-feature statistics and pairwise matrices, indexed by feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureCache {
    /// Entropy in bits of each binned feature.
    pub entropy: Vec<f64>,
    /// Standard deviation of each raw (unscaled) feature.
    pub std_dev: Vec<f64>,
    pub nmi: Vec<Vec<f64>>,
    /// `ig[i][j] = IG(f_i | f_j)`.
    pub ig: Vec<Vec<f64>>,
    pub pcc: Vec<Vec<f64>>,
    /// Euclidean distance between min-max scaled feature columns.
    pub feat_dist: Vec<Vec<f64>>,
    pub bin_count: usize,
}

struct PairStats {
    nmi: f64,
    ig_ij: f64,
    ig_ji: f64,
    pcc: f64,
    dist: f64,
}

impl MeasureCache {
    pub fn n_features(&self) -> usize {
        self.entropy.len()
    }

    /// Indices of features with zero entropy.
    pub fn constant_features(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&j| self.entropy[j] == 0.0)
            .collect()
    }

    pub fn save(&self, path: &Path, dataset_hash: &str) -> Result<(), MeasureError> {
        let persisted = PersistedCache {
            dataset_hash: dataset_hash.to_string(),
            bin_count: self.bin_count,
            cache: self.clone(),
        };
        let text = serde_json::to_string(&persisted).map_err(|source| MeasureError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, text).map_err(|source| MeasureError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Loads a cache written by [`MeasureCache::save`], refusing one built
    /// for different data or a different bin count.
    pub fn load(path: &Path, dataset_hash: &str, bins: usize) -> Result<Self, MeasureError> {
        let text = fs::read_to_string(path).map_err(|source| MeasureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let persisted: PersistedCache =
            serde_json::from_str(&text).map_err(|source| MeasureError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        if persisted.dataset_hash != dataset_hash || persisted.bin_count != bins {
            return Err(MeasureError::StaleCache {
                path: path.to_path_buf(),
                found_hash: persisted.dataset_hash,
                found_bins: persisted.bin_count,
            });
        }
        Ok(persisted.cache)
    }

    pub fn file_name(dataset_hash: &str, bins: usize) -> String {
        let short = &dataset_hash[..dataset_hash.len().min(16)];
        format!("measures-{short}-b{bins}.json")
    }
}

#[derive(Serialize, Deserialize)]
struct PersistedCache {
    dataset_hash: String,
    bin_count: usize,
    cache: MeasureCache,
}

/// Computes every measure for every feature and feature pair.
pub fn build_cache(
    ds: &NumericDataset,
    norm: &NormalizedView,
    bins: usize,
) -> Result<MeasureCache, MeasureError> {
    let m = ds.n_features();
    if m < 2 {
        return Err(MeasureError::TooFewFeatures(m));
    }
    if bins == 0 {
        return Err(MeasureError::ZeroBins);
    }
    if norm.n_cols != m || norm.n_rows != ds.n_rows() {
        return Err(MeasureError::Mismatch(format!(
            "{}x{} vs {}x{}",
            norm.n_rows,
            norm.n_cols,
            ds.n_rows(),
            m
        )));
    }

    let raw = ds.columns();
    let scaled: Vec<Vec<f64>> = (0..m).map(|j| norm.column(j)).collect();
    let kinds = ds.schema().kinds();
    let binned: Vec<Discretized> = raw
        .par_iter()
        .zip(&kinds)
        .map(|(col, &kind)| discretize(col, bins, kind))
        .collect();
    let entropy: Vec<f64> = binned.iter().map(entropy_of_codes).collect();
    let std_dev: Vec<f64> = raw.iter().map(|c| std_dev(c)).collect();

    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let stats: Vec<PairStats> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let t = Contingency::new(&binned[i], &binned[j]);
            PairStats {
                nmi: nmi_from(&t),
                ig_ij: t.gain_x_given_y(),
                ig_ji: t.gain_y_given_x(),
                pcc: pcc(&raw[i], &raw[j]),
                dist: euclidean(&scaled[i], &scaled[j]),
            }
        })
        .collect();

    let mut nmi = vec![vec![0.0; m]; m];
    let mut ig = vec![vec![0.0; m]; m];
    let mut pcc_m = vec![vec![0.0; m]; m];
    let mut feat_dist = vec![vec![0.0; m]; m];
    for j in 0..m {
        let varies = entropy[j] > 0.0;
        nmi[j][j] = if varies { 1.0 } else { 0.0 };
        ig[j][j] = entropy[j];
        pcc_m[j][j] = if std_dev[j] > 0.0 { 1.0 } else { 0.0 };
    }
    for (&(i, j), s) in pairs.iter().zip(&stats) {
        nmi[i][j] = s.nmi;
        nmi[j][i] = s.nmi;
        ig[i][j] = s.ig_ij;
        ig[j][i] = s.ig_ji;
        pcc_m[i][j] = s.pcc;
        pcc_m[j][i] = s.pcc;
        feat_dist[i][j] = s.dist;
        feat_dist[j][i] = s.dist;
    }

    let cache = MeasureCache {
        entropy,
        std_dev,
        nmi,
        ig,
        pcc: pcc_m,
        feat_dist,
        bin_count: bins,
    };
    let constant = cache.constant_features();
    if !constant.is_empty() {
        info!("constant features (zero entropy): {constant:?}");
    }
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::normalize_minmax;

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0.0, 0.0, 1.0, 1.0], 20), 1.0);
        assert_eq!(entropy(&[3.0; 7], 20), 0.0);
        // {a: 1/2, b: 1/4, c: 1/4}
        assert!((entropy(&[0.0, 0.0, 1.0, 2.0], 20) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn equal_width_binning_caps_entropy() {
        let col: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let d = discretize(&col, 8, FeatureKind::Continuous);
        assert_eq!(d.levels, 8);
        assert_eq!(d.codes[0], 0);
        assert_eq!(d.codes[999], 7);
        assert!(entropy(&col, 8) <= 3.0 + 1e-12);
    }

    #[test]
    fn categorical_columns_are_never_binned() {
        let col: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(discretize(&col, 4, FeatureKind::Categorical).levels, 50);
        assert_eq!(discretize(&col, 4, FeatureKind::Continuous).levels, 4);
    }

    #[test]
    fn mutual_information_examples() {
        let x = [0.0, 1.0, 0.0, 1.0];
        assert!((mutual_information(&x, &x, 20) - 1.0).abs() < 1e-12);
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 1.0, 0.0, 1.0];
        assert!(mutual_information(&a, &b, 20).abs() < 1e-12);
    }

    #[test]
    fn correlated_binary_table() {
        // p(0,0)=p(1,1)=0.4, p(0,1)=p(1,0)=0.1 over ten rows
        let x = [0., 0., 0., 0., 0., 1., 1., 1., 1., 1.];
        let y = [0., 0., 0., 0., 1., 1., 1., 1., 1., 0.];
        // direct summation of the 2x2 table with uniform marginals
        let oracle = 2.0 * 0.4 * (0.4f64 / 0.25).log2() + 2.0 * 0.1 * (0.1f64 / 0.25).log2();
        assert!((mutual_information(&x, &y, 20) - oracle).abs() < 1e-12);
        assert!((information_gain(&x, &y, 20) - oracle).abs() < 1e-12);
    }

    #[test]
    fn nmi_examples() {
        let x = [0.0, 1.0, 2.0, 0.0];
        assert!((normalized_mi(&x, &x, 20) - 1.0).abs() < 1e-12);
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 1.0, 0.0, 1.0];
        assert!(normalized_mi(&a, &b, 20).abs() < 1e-12);
        assert_eq!(normalized_mi(&[1.0; 4], &[2.0; 4], 20), 0.0);
    }

    #[test]
    fn information_gain_examples() {
        let x = [0.0, 1.0, 0.0, 1.0];
        assert!((information_gain(&x, &x, 20) - 1.0).abs() < 1e-12);
        assert_eq!(information_gain(&x, &[5.0; 4], 20), 0.0);
    }

    #[test]
    fn pcc_examples() {
        assert!((pcc(&[1., 2., 3.], &[2., 4., 6.]) - 1.0).abs() < 1e-12);
        assert!((pcc(&[1., 2., 3.], &[6., 4., 2.]) + 1.0).abs() < 1e-12);
        assert!(pcc(&[1., 2., 3.], &[1., 2., 1.]).abs() < 1e-12);
        assert_eq!(pcc(&[1., 2., 3.], &[4., 4., 4.]), 0.0);
    }

    #[test]
    fn std_dev_examples() {
        assert_eq!(std_dev(&[0.0, 2.0]), 1.0);
        assert_eq!(std_dev(&[4.0; 5]), 0.0);
    }

    #[test]
    fn cache_on_identical_columns() {
        let ds = NumericDataset::from_rows(
            &[vec![1.0, 1.0], vec![2.0, 2.0], vec![5.0, 5.0]],
            &[1, 1, 1],
        )
        .unwrap();
        let cache = build_cache(&ds, &normalize_minmax(&ds), 20).unwrap();
        assert!((cache.nmi[0][1] - 1.0).abs() < 1e-12);
        assert_eq!(cache.feat_dist[0][1], 0.0);
        assert_eq!(cache.feat_dist[1][1], 0.0);
    }

    #[test]
    fn cache_requires_two_features() {
        let ds = NumericDataset::from_rows(&[vec![1.0], vec![2.0]], &[1, 1]).unwrap();
        assert!(matches!(
            build_cache(&ds, &normalize_minmax(&ds), 20),
            Err(MeasureError::TooFewFeatures(1))
        ));
    }

    #[test]
    fn cache_persistence_checks_key() {
        let ds = NumericDataset::from_rows(
            &[vec![1.0, 3.0], vec![2.0, 1.0], vec![5.0, 2.0]],
            &[1, 1, 1],
        )
        .unwrap();
        let cache = build_cache(&ds, &normalize_minmax(&ds), 20).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MeasureCache::file_name("abc", 20));
        cache.save(&path, "abc").unwrap();
        assert_eq!(MeasureCache::load(&path, "abc", 20).unwrap(), cache);
        assert!(matches!(
            MeasureCache::load(&path, "abd", 20),
            Err(MeasureError::StaleCache { .. })
        ));
    }
}
