//! The file-based pipeline behind the `moofs` binary.
//!
//! A run directory accumulates artifacts phase by phase:
//!
//! | phase        | writes                                               |
//! |--------------|------------------------------------------------------|
//! | `preprocess` | `data.csv`, `encoding.json`, optional `test.csv`     |
//! | `select`     | `front.json`, `trace.csv`, `measures-*.json`         |
//! | `evaluate`   | `evaluation-<classifier>.json`                       |
//! | `report`     | `report.txt`, `scatter.csv`                          |
//!
//! Every phase also rewrites `manifest.json` with its configuration, input
//! hashes, timing and an inventory of the files in the directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use moofs_core::classify::{
    cross_validate, metrics, confusion, project, Classifier, ClassifierSpec, ConfusionMatrix,
    CvReport, MetricsReport, TreeParams,
};
use moofs_core::dataset::{
    builtin, encode, encode_frozen, load_csv, normalize_minmax, read_encoded_csv,
    stratified_subsample_indices, write_encoded_csv, ClassId, FeatureSchema, MinMaxScaler,
    NumericDataset,
};
use moofs_core::measures::{build_cache, MeasureCache};
use moofs_core::nsga2::{evolve, trace_csv, CrossoverKind, GaConfig};
use moofs_core::objectives::{Chromosome, ModelToken, ObjectiveModel, ObjectiveVector};

pub const DATA_FILE: &str = "data.csv";
pub const TEST_FILE: &str = "test.csv";
pub const ENCODING_FILE: &str = "encoding.json";
pub const FRONT_FILE: &str = "front.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.txt";
pub const SCATTER_FILE: &str = "scatter.csv";

pub fn evaluation_file(classifier: &str) -> String {
    format!("evaluation-{classifier}.json")
}

/// Seed for one phase, derived from the master seed so that phases draw
/// independent streams.
pub fn derive_seed(master: u64, phase: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}/{phase}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn require(path: &Path, what: &str) -> Result<()> {
    ensure!(path.exists(), "missing {what}: {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Resolves a built-in schema token (`kdd99`, `nslkdd`, `kyoto`) or a JSON file.
pub fn resolve_schema(spec: &str) -> Result<FeatureSchema> {
    if let Some(schema) = builtin::by_name(spec) {
        return Ok(schema);
    }
    let path = Path::new(spec);
    ensure!(
        path.exists(),
        "schema '{spec}' is neither a built-in (kdd99, nslkdd, kyoto) nor an existing file"
    );
    Ok(FeatureSchema::load(path)?)
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub config: serde_json::Value,
    /// Input file name -> sha256.
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub phases: BTreeMap<String, PhaseRecord>,
    /// Every file in the run directory except the manifest itself.
    pub files: BTreeMap<String, FileRecord>,
}

impl RunManifest {
    fn empty() -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            phases: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }
}

pub fn inventory(dir: &Path) -> Result<BTreeMap<String, FileRecord>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !entry.file_type()?.is_file() {
            continue;
        }
        let bytes = fs::read(entry.path())?;
        files.insert(
            name,
            FileRecord {
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            },
        );
    }
    Ok(files)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    read_json(&dir.join(MANIFEST_FILE))
}

fn record_phase(dir: &Path, phase: &str, record: PhaseRecord) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest = if path.exists() {
        read_json(&path)?
    } else {
        RunManifest::empty()
    };
    manifest.version = env!("CARGO_PKG_VERSION").into();
    manifest.phases.insert(phase.to_string(), record);
    manifest.files = inventory(dir)?;
    write_json(&path, &manifest)
}

// ---------------------------------------------------------------------------
// preprocess

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct PreprocessArgs {
    /// Raw training records (CSV, or tab-separated for Kyoto).
    #[arg(long)]
    pub data: PathBuf,
    /// Built-in schema (kdd99, nslkdd, kyoto) or a schema JSON file.
    #[arg(long)]
    pub schema: String,
    /// Run directory to create or reuse.
    #[arg(long)]
    pub out: PathBuf,
    /// Held-out raw records encoded with the training tables.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Keep a stratified sample of this many training rows.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Side information needed to interpret `data.csv` and `test.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSidecar {
    /// Schema with every learned categorical code table.
    pub schema: FeatureSchema,
    /// Feature ranges of the encoded training data.
    pub scaler: MinMaxScaler,
    pub source: String,
    pub source_sha256: String,
    pub rows: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub subsample: Option<usize>,
    pub subsample_seed: Option<u64>,
    pub test_source: Option<String>,
    pub test_rows: Option<usize>,
}

fn class_counts_by_name(ds: &NumericDataset) -> BTreeMap<String, usize> {
    ds.class_counts()
        .into_iter()
        .map(|(c, n)| (ds.schema().class_name(c), n))
        .collect()
}

pub fn cmd_preprocess(args: &PreprocessArgs) -> Result<()> {
    let start = Instant::now();
    require(&args.data, "training data")?;
    if let Some(test) = &args.test {
        require(test, "test data")?;
    }
    let schema = resolve_schema(&args.schema)?;
    schema.validate()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let raw = load_csv(&args.data, &schema)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let mut train = encode(&raw).with_context(|| format!("encoding {}", args.data.display()))?;
    info!("encoded {} rows from {}", train.n_rows(), args.data.display());
    let subsample_seed = args.subsample.map(|_| derive_seed(args.seed, "preprocess"));
    if let (Some(n), Some(seed)) = (args.subsample, subsample_seed) {
        let idx = stratified_subsample_indices(train.labels(), n, seed)?;
        train = train.subset(&idx);
        info!("kept a stratified sample of {n} rows");
    }
    write_encoded_csv(&train, &args.out.join(DATA_FILE))?;

    let mut inputs = BTreeMap::from([(file_name(&args.data), sha256_file(&args.data)?)]);
    let mut test_rows = None;
    if let Some(test_path) = &args.test {
        let raw_test = load_csv(test_path, &schema)
            .with_context(|| format!("loading {}", test_path.display()))?;
        let test = encode_frozen(&raw_test, train.schema())
            .with_context(|| format!("encoding {}", test_path.display()))?;
        write_encoded_csv(&test, &args.out.join(TEST_FILE))?;
        test_rows = Some(test.n_rows());
        inputs.insert(file_name(test_path), sha256_file(test_path)?);
    }

    let sidecar = EncodingSidecar {
        schema: train.schema().clone(),
        scaler: MinMaxScaler::fit(&train),
        source: file_name(&args.data),
        source_sha256: inputs[&file_name(&args.data)].clone(),
        rows: train.n_rows(),
        class_counts: class_counts_by_name(&train),
        subsample: args.subsample,
        subsample_seed,
        test_source: args.test.as_deref().map(file_name),
        test_rows,
    };
    write_json(&args.out.join(ENCODING_FILE), &sidecar)?;
    record_phase(
        &args.out,
        "preprocess",
        PhaseRecord {
            config: serde_json::to_value(args)?,
            inputs,
            seed: args.seed,
            elapsed_ms: start.elapsed().as_millis(),
        },
    )
}

pub fn load_sidecar(dir: &Path) -> Result<EncodingSidecar> {
    let path = dir.join(ENCODING_FILE);
    require(&path, "encoding sidecar (run `preprocess` first)")?;
    read_json(&path)
}

pub fn load_training_data(dir: &Path) -> Result<(EncodingSidecar, NumericDataset)> {
    let sidecar = load_sidecar(dir)?;
    let path = dir.join(DATA_FILE);
    require(&path, "encoded training data")?;
    let ds = read_encoded_csv(&path, &sidecar.schema)?;
    Ok((sidecar, ds))
}

// ---------------------------------------------------------------------------
// select

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SelectArgs {
    /// Run directory produced by `preprocess`.
    #[arg(long)]
    pub data: PathBuf,
    /// Objective model: model1a, model1b, model2, model3a, model3b, model4,
    /// model5a, model5b or model6.
    #[arg(long, default_value = "model3a")]
    pub model: String,
    #[arg(long, default_value_t = 100)]
    pub pop: usize,
    #[arg(long, default_value_t = 200)]
    pub gens: usize,
    #[arg(long, default_value_t = 0.9)]
    pub cx: f64,
    #[arg(long = "mut", default_value_t = 0.0244)]
    pub mutation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Histogram bins for continuous features in entropy-based measures.
    #[arg(long, default_value_t = moofs_core::measures::DEFAULT_BINS)]
    pub bins: usize,
    /// Crossover operator: single-point or uniform.
    #[arg(long, default_value = "single-point")]
    pub crossover: String,
    #[arg(long, default_value_t = 2)]
    pub tournament: usize,
}

impl SelectArgs {
    pub fn new(data: impl Into<PathBuf>, model: &str) -> Self {
        Self {
            data: data.into(),
            model: model.into(),
            pop: 100,
            gens: 200,
            cx: 0.9,
            mutation: 0.0244,
            seed: 0,
            bins: moofs_core::measures::DEFAULT_BINS,
            crossover: "single-point".into(),
            tournament: 2,
        }
    }

    pub fn ga_config(&self) -> Result<GaConfig> {
        let crossover = match self.crossover.as_str() {
            "single-point" | "single_point" | "single" => CrossoverKind::SinglePoint,
            "uniform" => CrossoverKind::Uniform,
            other => bail!("unknown crossover '{other}' (single-point or uniform)"),
        };
        let cfg = GaConfig {
            pop_size: self.pop,
            max_generations: self.gens,
            crossover_rate: self.cx,
            mutation_rate: self.mutation,
            seed: derive_seed(self.seed, "select"),
            tournament_size: self.tournament,
            crossover,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub index: usize,
    pub bits: Chromosome,
    pub selected: Vec<usize>,
    pub objectives: ObjectiveVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontFile {
    pub model: String,
    pub seed: u64,
    pub config: GaConfig,
    pub bins: usize,
    pub dataset_sha256: String,
    pub feature_names: Vec<String>,
    pub members: Vec<FrontMember>,
}

/// Builds the measure cache, reusing a matching cached file in `dir`.
fn measure_cache(dir: &Path, ds: &NumericDataset, hash: &str, bins: usize) -> Result<MeasureCache> {
    let path = dir.join(MeasureCache::file_name(hash, bins));
    if path.exists() {
        match MeasureCache::load(&path, hash, bins) {
            Ok(cache) => return Ok(cache),
            Err(e) => warn!("ignoring measure cache {}: {e}", path.display()),
        }
    }
    let cache = build_cache(ds, &normalize_minmax(ds), bins)?;
    cache.save(&path, hash)?;
    Ok(cache)
}

/// Runs the GA on the feature columns only; class labels are never read.
pub fn cmd_select(args: &SelectArgs) -> Result<()> {
    let start = Instant::now();
    let token: ModelToken = args.model.parse()?;
    let cfg = args.ga_config()?;
    let (sidecar, ds) = load_training_data(&args.data)?;
    let data_hash = sha256_file(&args.data.join(DATA_FILE))?;
    let cache = measure_cache(&args.data, &ds, &data_hash, args.bins)?;
    let exclusions = sidecar.schema.sd_exclusion_indices()?;
    let model = ObjectiveModel::from_token(token, &exclusions);
    info!(
        "selecting with {token} over {} features, {} generations of {}",
        ds.n_features(),
        cfg.max_generations,
        cfg.pop_size
    );
    let evolution = evolve(&cache, &model, &cfg)?;

    let mut front = evolution.front;
    front.sort_by(|a, b| {
        a.chromosome
            .count_selected()
            .cmp(&b.chromosome.count_selected())
            .then_with(|| a.chromosome.cmp(&b.chromosome))
    });
    let members = front
        .into_iter()
        .enumerate()
        .map(|(index, s)| FrontMember {
            index,
            selected: s.chromosome.selected(),
            bits: s.chromosome,
            objectives: s.objectives,
        })
        .collect();
    let file = FrontFile {
        model: token.to_string(),
        seed: args.seed,
        config: cfg,
        bins: args.bins,
        dataset_sha256: data_hash.clone(),
        feature_names: sidecar.schema.feature_names(),
        members,
    };
    write_json(&args.data.join(FRONT_FILE), &file)?;
    fs::write(args.data.join(TRACE_FILE), trace_csv(&evolution.trace))?;
    record_phase(
        &args.data,
        "select",
        PhaseRecord {
            config: serde_json::to_value(args)?,
            inputs: BTreeMap::from([(DATA_FILE.to_string(), data_hash)]),
            seed: args.seed,
            elapsed_ms: start.elapsed().as_millis(),
        },
    )
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// `front.json` inside a run directory.
    #[arg(long)]
    pub front: PathBuf,
    /// Classifier token: dtree or knn<k> (e.g. knn5).
    #[arg(long, default_value = "dtree")]
    pub classifier: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Master seed; defaults to the seed recorded in the front file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Decision-tree depth limit (unbounded when absent).
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
}

impl EvaluateArgs {
    pub fn new(front: impl Into<PathBuf>, classifier: &str, folds: usize) -> Self {
        Self {
            front: front.into(),
            classifier: classifier.into(),
            folds,
            seed: None,
            max_depth: None,
            min_samples_split: 2,
        }
    }

    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        let spec: ClassifierSpec = self.classifier.parse()?;
        Ok(match spec {
            ClassifierSpec::DecisionTree(_) => ClassifierSpec::DecisionTree(TreeParams {
                max_depth: self.max_depth,
                min_samples_split: self.min_samples_split,
            }),
            other => other,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberScore {
    pub index: usize,
    pub selected: Vec<usize>,
    pub mean_accuracy: Option<f64>,
    pub min_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSubset {
    pub index: usize,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub cv: CvReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestEvaluation {
    pub rows: usize,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFile {
    pub classifier: String,
    pub folds: usize,
    pub seed: u64,
    pub cv_seed: u64,
    pub front_sha256: String,
    pub members: Vec<MemberScore>,
    pub best: BestSubset,
    pub test: Option<TestEvaluation>,
}

/// Index into `scores` of the preferred subset: highest mean accuracy, then
/// fewest features, then lowest front index. Failed members are skipped.
pub fn pick_best(scores: &[MemberScore]) -> Option<usize> {
    scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.mean_accuracy.map(|a| (i, a, s.selected.len(), s.index)))
        .min_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(a.2.cmp(&b.2))
                .then(a.3.cmp(&b.3))
        })
        .map(|(i, ..)| i)
}

/// Trains on all of `train` restricted to `selected` and scores `test`.
pub fn evaluate_on_test(
    train: &NumericDataset,
    test: &NumericDataset,
    selected: &[usize],
    classifier: &dyn Classifier,
) -> Result<TestEvaluation> {
    let train = project(train, selected)?;
    let test = project(test, selected)?;
    let predicted = classifier.fit_predict(&train, &test)?;
    let classes: Vec<ClassId> = train.schema().class_ids().into_iter().collect();
    let cm = confusion(&classes, test.labels(), &predicted)?;
    Ok(TestEvaluation {
        rows: test.n_rows(),
        report: metrics(&cm),
        confusion: cm,
    })
}

fn run_dir_of(front: &Path) -> PathBuf {
    match front.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    require(&args.front, "front file")?;
    let dir = run_dir_of(&args.front);
    let front: FrontFile = read_json(&args.front)?;
    ensure!(!front.members.is_empty(), "{} holds no subsets", args.front.display());
    let classifier = args.classifier_spec()?;
    let seed = args.seed.unwrap_or(front.seed);
    let cv_seed = derive_seed(seed, "evaluate");
    let (sidecar, ds) = load_training_data(&dir)?;

    let mut reports: Vec<Option<CvReport>> = Vec::with_capacity(front.members.len());
    let mut scores = Vec::with_capacity(front.members.len());
    for member in &front.members {
        let outcome = cross_validate(&ds, &member.selected, &classifier, args.folds, cv_seed);
        let (mean, min, error) = match &outcome {
            Ok(cv) => (Some(cv.mean_accuracy), Some(cv.min_accuracy), None),
            Err(e) => {
                warn!("subset {} failed: {e}", member.index);
                (None, None, Some(e.to_string()))
            }
        };
        info!(
            "subset {} ({} features): mean accuracy {:?}",
            member.index,
            member.selected.len(),
            mean
        );
        scores.push(MemberScore {
            index: member.index,
            selected: member.selected.clone(),
            mean_accuracy: mean,
            min_accuracy: min,
            error,
        });
        reports.push(outcome.ok());
    }
    let Some(best_pos) = pick_best(&scores) else {
        bail!("every subset failed to evaluate with {classifier}");
    };
    let best_member = &front.members[best_pos];
    let names = sidecar.schema.feature_names();
    let best = BestSubset {
        index: best_member.index,
        selected: best_member.selected.clone(),
        selected_names: best_member.selected.iter().map(|&j| names[j].clone()).collect(),
        cv: reports[best_pos].take().expect("best subset evaluated"),
    };

    let test_path = dir.join(TEST_FILE);
    let mut inputs = BTreeMap::from([
        (file_name(&args.front), sha256_file(&args.front)?),
        (DATA_FILE.to_string(), sha256_file(&dir.join(DATA_FILE))?),
    ]);
    let test = if test_path.exists() {
        let test_ds = read_encoded_csv(&test_path, &sidecar.schema)?;
        inputs.insert(TEST_FILE.to_string(), sha256_file(&test_path)?);
        Some(evaluate_on_test(&ds, &test_ds, &best.selected, &classifier)?)
    } else {
        None
    };

    let file = EvaluationFile {
        classifier: classifier.to_string(),
        folds: args.folds,
        seed,
        cv_seed,
        front_sha256: inputs[&file_name(&args.front)].clone(),
        members: scores,
        best,
        test,
    };
    write_json(&dir.join(evaluation_file(&file.classifier)), &file)?;
    record_phase(
        &dir,
        &format!("evaluate-{}", file.classifier),
        PhaseRecord {
            config: serde_json::to_value(args)?,
            inputs,
            seed,
            elapsed_ms: start.elapsed().as_millis(),
        },
    )
}

// ---------------------------------------------------------------------------
// report

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReportArgs {
    /// Run directory holding the artifacts of the earlier phases.
    #[arg(long)]
    pub run: PathBuf,
}

pub fn scatter_csv(front: &FrontFile) -> String {
    let mut out = String::from("f_sel,f_unsel,f_disp\n");
    for m in &front.members {
        let o = m.objectives;
        let _ = writeln!(out, "{},{},{}", o.f_sel, o.f_unsel, o.f_disp);
    }
    out
}

fn evaluation_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("evaluation-") && n.ends_with(".json"))
        .collect();
    names.sort();
    Ok(names)
}

/// Renders the human-readable summary. Depends only on artifact contents,
/// never on paths or timings, so regenerating it is byte-stable.
pub fn render_report(
    sidecar: &EncodingSidecar,
    front: &FrontFile,
    evaluations: &[(String, EvaluationFile)],
    files: &[String],
) -> String {
    let schema = &sidecar.schema;
    let class_name = |c: ClassId| schema.class_name(c);
    let mut out = String::new();
    let _ = writeln!(out, "Feature selection run report");
    let _ = writeln!(out);
    let _ = writeln!(out, "Dataset");
    let _ = writeln!(
        out,
        "  {DATA_FILE}: {} rows x {} features (source {}, sha256 {})",
        sidecar.rows,
        schema.n_features(),
        sidecar.source,
        front.dataset_sha256
    );
    if let (Some(src), Some(n)) = (&sidecar.test_source, sidecar.test_rows) {
        let _ = writeln!(out, "  {TEST_FILE}: {n} rows (source {src})");
    }
    for (name, n) in &sidecar.class_counts {
        let _ = writeln!(out, "  class {name}: {n}");
    }
    let _ = writeln!(out);
    let c = &front.config;
    let _ = writeln!(out, "Selection ({FRONT_FILE})");
    let _ = writeln!(
        out,
        "  model {}, population {}, generations {}, crossover {} ({:?}), mutation {}, bins {}, seed {}",
        front.model,
        c.pop_size,
        c.max_generations,
        c.crossover_rate,
        c.crossover,
        c.mutation_rate,
        front.bins,
        front.seed
    );
    let _ = writeln!(out, "  Pareto front: {} subsets", front.members.len());
    let _ = writeln!(
        out,
        "  {:>5} {:>5} {:>14} {:>14} {:>14}  selected",
        "index", "size", "f_sel", "f_unsel", "f_disp"
    );
    for m in &front.members {
        let sel: Vec<String> = m.selected.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "  {:>5} {:>5} {:>14.6} {:>14.6} {:>14.6}  {}",
            m.index,
            m.selected.len(),
            m.objectives.f_sel,
            m.objectives.f_unsel,
            m.objectives.f_disp,
            sel.join(" ")
        );
    }
    for (name, ev) in evaluations {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Evaluation ({name}): {}, {}-fold cross-validation, seed {}",
            ev.classifier, ev.folds, ev.seed
        );
        for s in &ev.members {
            match (s.mean_accuracy, &s.error) {
                (Some(mean), _) => {
                    let _ = writeln!(
                        out,
                        "  subset {:>3} ({:>2} features): mean accuracy {:.4}%, min accuracy {:.4}%",
                        s.index,
                        s.selected.len(),
                        100.0 * mean,
                        100.0 * s.min_accuracy.unwrap_or(mean)
                    );
                }
                (None, err) => {
                    let _ = writeln!(
                        out,
                        "  subset {:>3}: failed ({})",
                        s.index,
                        err.as_deref().unwrap_or("unknown error")
                    );
                }
            }
        }
        let b = &ev.best;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "  Best subset {} ({} features): {}",
            b.index,
            b.selected.len(),
            b.selected_names.join(", ")
        );
        let _ = writeln!(
            out,
            "  mean fold accuracy {:.4}%, min fold accuracy {:.4}%",
            100.0 * b.cv.mean_accuracy,
            100.0 * b.cv.min_accuracy
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "  Cross-validated metrics (%, folds pooled)");
        for line in b.cv.pooled.to_table(class_name).lines() {
            let _ = writeln!(out, "    {line}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "  Confusion matrix (folds pooled; rows actual, columns predicted)");
        for line in b.cv.pooled_confusion.to_table(class_name).lines() {
            let _ = writeln!(out, "    {line}");
        }
        if let Some(t) = &ev.test {
            let _ = writeln!(out);
            let _ = writeln!(out, "  Held-out test metrics (%, {} rows)", t.rows);
            for line in t.report.to_table(class_name).lines() {
                let _ = writeln!(out, "    {line}");
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "  Test confusion matrix (rows actual, columns predicted)");
            for line in t.confusion.to_table(class_name).lines() {
                let _ = writeln!(out, "    {line}");
            }
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Files");
    for f in files {
        let _ = writeln!(out, "  {f}");
    }
    out
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    let start = Instant::now();
    let dir = &args.run;
    ensure!(dir.is_dir(), "run directory {} does not exist", dir.display());
    for (name, what) in [
        (ENCODING_FILE, "encoding sidecar"),
        (DATA_FILE, "encoded training data"),
        (FRONT_FILE, "Pareto front"),
        (TRACE_FILE, "generation trace"),
    ] {
        require(&dir.join(name), what)?;
    }
    let sidecar = load_sidecar(dir)?;
    let front: FrontFile = read_json(&dir.join(FRONT_FILE))?;
    let eval_names = evaluation_files(dir)?;
    ensure!(
        !eval_names.is_empty(),
        "missing evaluation file (evaluation-<classifier>.json) in {}; run `evaluate` first",
        dir.display()
    );
    let evaluations = eval_names
        .iter()
        .map(|n| Ok((n.clone(), read_json::<EvaluationFile>(&dir.join(n))?)))
        .collect::<Result<Vec<_>>>()?;

    let mut files: Vec<String> = inventory(dir)?.into_keys().collect();
    files.extend([REPORT_FILE.to_string(), SCATTER_FILE.to_string(), MANIFEST_FILE.to_string()]);
    files.sort();
    files.dedup();

    fs::write(dir.join(SCATTER_FILE), scatter_csv(&front))?;
    let text = render_report(&sidecar, &front, &evaluations, &files);
    fs::write(dir.join(REPORT_FILE), text)?;
    let mut inputs = BTreeMap::new();
    for name in [FRONT_FILE, ENCODING_FILE].iter().map(|s| s.to_string()).chain(eval_names) {
        inputs.insert(name.clone(), sha256_file(&dir.join(&name))?);
    }
    record_phase(
        dir,
        "report",
        PhaseRecord {
            config: serde_json::to_value(args)?,
            inputs,
            seed: front.seed,
            elapsed_ms: start.elapsed().as_millis(),
        },
    )
}
