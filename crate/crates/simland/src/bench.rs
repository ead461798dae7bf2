//! Benchmark harness: landmark sweeps over random splits, comparing the
//! landmarking methods against the kernel regression baseline.
//!
//! Results are deterministic for a fixed config and seed. Every random choice
//! uses a sub-seed derived from (purpose, split index), and records are
//! sorted before emission, so neither thread count nor scheduling order can
//! change the output. The `SIMLAND_THREADS` environment variable caps the
//! worker pool.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::KrModel;
use crate::data::{self, Dataset, FeatureScaling, HeaderMode, Task, TargetScaling};
use crate::embedding::{sample_landmark_indices, Embedder, LandmarkMode, Normalization};
use crate::error::{Error, Result};
use crate::optim::SolverParams;
use crate::ordinal::{self, ordinal_errors};
use crate::ranking::{self, RankingInstance};
use crate::regression::fit_dense;
use crate::similarity::{index_point, SimilarityKind, SimilarityMatrix, SimilaritySpec};
use crate::sparse::{fit_fgs, FgsConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Kr,
    Regland,
    ReglandSp,
    Orland,
    Rank,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Kr => "kr",
            Method::Regland => "regland",
            Method::ReglandSp => "regland-sp",
            Method::Orland => "orland",
            Method::Rank => "rank",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kr" => Ok(Method::Kr),
            "regland" => Ok(Method::Regland),
            "regland-sp" => Ok(Method::ReglandSp),
            "orland" => Ok(Method::Orland),
            "rank" => Ok(Method::Rank),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }

    pub fn compatible_with(&self, task: Task) -> bool {
        match task {
            Task::Regression => matches!(self, Method::Kr | Method::Regland | Method::ReglandSp),
            Task::Ordinal => matches!(self, Method::Kr | Method::Orland),
            Task::Ranking => matches!(self, Method::Rank),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    Aae,
    Mislabel,
    Ndcg,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Aae => "aae",
            Metric::Mislabel => "mislabel",
            Metric::Ndcg => "ndcg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(Metric::Mse),
            "aae" => Ok(Metric::Aae),
            "mislabel" => Ok(Metric::Mislabel),
            "ndcg" => Ok(Metric::Ndcg),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }

    /// The headline test metric per task.
    pub fn for_task(task: Task) -> Metric {
        match task {
            Task::Regression => Metric::Mse,
            Task::Ordinal => Metric::Aae,
            Task::Ranking => Metric::Ndcg,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_kernel() -> String {
    "manhattan".into()
}
fn default_methods() -> Vec<Method> {
    vec![Method::Kr, Method::Regland, Method::ReglandSp]
}
fn default_landmarks() -> Vec<usize> {
    vec![5, 10, 20, 30, 40, 50]
}
fn default_num_splits() -> usize {
    5
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_norm_bound() -> f64 {
    10.0
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_gamma() -> f64 {
    0.25
}
fn default_beta() -> f64 {
    100.0
}
fn default_l1_radius() -> f64 {
    1.0
}
fn default_fgs_tolerance() -> f64 {
    1e-3
}
fn default_iters() -> usize {
    2000
}
fn default_true() -> bool {
    true
}

/// Declarative description of one benchmark run. Flat keys so a JSON config
/// file mirrors the struct one to one; unset keys take the defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Path to the dataset CSV (tabular tasks) or ranking CSV.
    pub dataset: String,
    #[serde(default = "ExperimentConfig::default_task")]
    pub task: Task,
    /// Similarity kind: sigmoid, manhattan, gaussian, euclidean, linear, precomputed.
    #[serde(default = "default_kernel")]
    pub kernel: String,
    /// Explicit sigmoid slope; defaults to 1 / feature dimension.
    #[serde(default)]
    pub kernel_a: Option<f64>,
    /// Explicit sigmoid offset; defaults to -1.
    #[serde(default)]
    pub kernel_r: Option<f64>,
    /// Explicit gaussian bandwidth; defaults to the mean pairwise distance
    /// of each split's training points.
    #[serde(default)]
    pub kernel_sigma: Option<f64>,
    /// CSV path of the precomputed similarity matrix.
    #[serde(default)]
    pub kernel_matrix: Option<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_landmarks")]
    pub landmarks: Vec<usize>,
    #[serde(default = "default_num_splits")]
    pub num_splits: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// L2 ball radius for the dense, ordinal, and ranking fits.
    #[serde(default = "default_norm_bound")]
    pub b: f64,
    /// Insensitivity width of the regression losses.
    #[serde(default = "default_epsilon")]
    pub eps: f64,
    /// Ordinal margin.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Smoothing constant of the sparse surrogate.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// L1 ball radius of the sparse fit.
    #[serde(default = "default_l1_radius")]
    pub c_w: f64,
    /// Sparsity cap override for the greedy fit.
    #[serde(default)]
    pub k: Option<usize>,
    /// Duality-gap stopping tolerance of the greedy fit.
    #[serde(default = "default_fgs_tolerance")]
    pub fgs_tolerance: f64,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Z-score features on each training split.
    #[serde(default = "default_true")]
    pub scale_features: bool,
    /// Min-max scale regression targets to [0, 1] on each training split.
    #[serde(default = "default_true")]
    pub scale_targets: bool,
    /// Equi-frequency binning of targets into this many ordinal labels.
    #[serde(default)]
    pub bins: Option<usize>,
    /// Reuse landmark points as training examples instead of holding them out.
    #[serde(default)]
    pub double_dip: bool,
}

impl ExperimentConfig {
    fn default_task() -> Task {
        Task::Regression
    }

    /// Minimal config for a dataset path; everything else defaulted.
    pub fn for_dataset(path: impl Into<String>) -> Self {
        serde_json::from_value(serde_json::json!({ "dataset": path.into() })).expect("defaults are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The experiment conventions used for the reported tables: data-driven
    /// kernel parameters, 5 random splits, and the 50-landmark summary point.
    pub fn apply_paper_defaults(&mut self) {
        self.kernel_a = None;
        self.kernel_r = None;
        self.kernel_sigma = None;
        self.num_splits = 5;
        self.landmarks = vec![50];
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.is_empty() {
            return Err(Error::Config("dataset path is empty".into()));
        }
        let kind = SimilarityKind::parse(&self.kernel)?;
        if kind == SimilarityKind::Precomputed && self.kernel_matrix.is_none() {
            return Err(Error::Config("precomputed kernel needs kernel_matrix".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        for m in &self.methods {
            if !m.compatible_with(self.task) {
                return Err(Error::Config(format!("method {m} is not valid for task {}", self.task.name())));
            }
        }
        if self.landmarks.is_empty() || self.landmarks.contains(&0) {
            return Err(Error::Config("landmark counts must be positive and non-empty".into()));
        }
        if self.num_splits == 0 {
            return Err(Error::Config("need at least one split".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test fraction must be in (0, 1), got {}", self.test_fraction)));
        }
        if !(self.b > 0.0) || !(self.c_w > 0.0) || !(self.gamma > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("b, c_w, gamma, and beta must be positive".into()));
        }
        if self.eps < 0.0 {
            return Err(Error::Config(format!("eps must be non-negative, got {}", self.eps)));
        }
        if !(self.fgs_tolerance > 0.0) {
            return Err(Error::Config("fgs_tolerance must be positive".into()));
        }
        if self.iters == 0 {
            return Err(Error::Config("need at least one solver iteration".into()));
        }
        if let Some(r) = self.bins {
            if self.task != Task::Ordinal {
                return Err(Error::Config("bins only apply to the ordinal task".into()));
            }
            if r < 2 {
                return Err(Error::Config(format!("need at least 2 bins, got {r}")));
            }
        }
        if self.task == Task::Ranking && self.methods.iter().any(|m| *m != Method::Rank) {
            return Err(Error::Config("ranking runs support only the rank method".into()));
        }
        Ok(())
    }
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub dataset: String,
    pub kernel: String,
    pub method: Method,
    pub landmarks: usize,
    pub split: usize,
    pub metric: Metric,
    pub value: f64,
}

/// Records plus any skipped-cell warnings, both deterministically ordered.
#[derive(Debug, Clone, Default)]
pub struct BenchOutput {
    pub records: Vec<ResultRecord>,
    pub warnings: Vec<String>,
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("SIMLAND_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("SIMLAND_THREADS must be an integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))
}

/// Runs the full sweep described by the config: for every (landmark count,
/// split) cell, sample landmarks from the train split, embed, fit each
/// method, and evaluate on the test split. The kernel regression baseline
/// ignores landmarks, so its value is constant across counts within a split.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let dataset_name = dataset_label(&cfg.dataset);
    let pool = thread_pool()?;

    let per_split: Vec<(Vec<ResultRecord>, Vec<String>)> = match cfg.task {
        Task::Ranking => {
            let instances = data::load_ranking_csv(&cfg.dataset, HeaderMode::Auto)?;
            pool.install(|| {
                (0..cfg.num_splits)
                    .into_par_iter()
                    .map(|s| run_ranking_split(cfg, &dataset_name, &instances, s))
                    .collect::<Result<Vec<_>>>()
            })?
        }
        Task::Regression | Task::Ordinal => {
            let ds = prepare_tabular(cfg)?;
            let matrix = match (&cfg.kernel_matrix, SimilarityKind::parse(&cfg.kernel)?) {
                (Some(path), SimilarityKind::Precomputed) => {
                    let m = SimilarityMatrix::from_csv(path)?;
                    if m.len() != ds.len() {
                        return Err(Error::Data(format!(
                            "precomputed matrix covers {} points but dataset has {}",
                            m.len(),
                            ds.len()
                        )));
                    }
                    Some(Arc::new(m))
                }
                _ => None,
            };
            pool.install(|| {
                (0..cfg.num_splits)
                    .into_par_iter()
                    .map(|s| run_tabular_split(cfg, &dataset_name, &ds, matrix.as_ref(), s))
                    .collect::<Result<Vec<_>>>()
            })?
        }
    };

    let mut out = BenchOutput::default();
    for (records, warnings) in per_split {
        out.records.extend(records);
        out.warnings.extend(warnings);
    }
    out.records.sort_by(|a, b| {
        (a.method, a.landmarks, a.split, a.metric).cmp(&(b.method, b.landmarks, b.split, b.metric))
    });
    Ok(out)
}

fn dataset_label(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// Loads the CSV and applies dataset-level preprocessing: ordinal targets are
/// binned (or native labels remapped to contiguous {1..r}) before splitting.
fn prepare_tabular(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = data::load_csv(&cfg.dataset, HeaderMode::Auto)?;
    ds.task = cfg.task;
    if cfg.task == Task::Ordinal {
        let ord = data::ordinalize(&ds.targets, cfg.bins)?;
        ds.provenance.log.push(ord.log);
        ds.targets = ord.labels.into_iter().map(|l| l as f64).collect();
    }
    let kind = SimilarityKind::parse(&cfg.kernel)?;
    if kind == SimilarityKind::Precomputed {
        ds.features = (0..ds.len()).map(index_point).collect();
        ds.provenance.log.push("features replaced by precomputed-matrix index carriers".into());
    }
    Ok(ds)
}

fn resolve_spec(
    cfg: &ExperimentConfig,
    train_features: &[Vec<f64>],
    matrix: Option<&Arc<SimilarityMatrix>>,
) -> Result<SimilaritySpec> {
    let kind = SimilarityKind::parse(&cfg.kernel)?;
    match kind {
        SimilarityKind::Sigmoid => {
            let p = train_features.first().map_or(0, Vec::len);
            if p == 0 {
                return Err(Error::Data("sigmoid kernel needs at least one feature".into()));
            }
            Ok(SimilaritySpec::Sigmoid {
                a: cfg.kernel_a.unwrap_or(1.0 / p as f64),
                r: cfg.kernel_r.unwrap_or(-1.0),
            })
        }
        SimilarityKind::Gaussian => match cfg.kernel_sigma {
            Some(s) => SimilaritySpec::gaussian(s),
            None => SimilaritySpec::defaults(SimilarityKind::Gaussian, train_features),
        },
        SimilarityKind::Manhattan => Ok(SimilaritySpec::Manhattan),
        SimilarityKind::Euclidean => Ok(SimilaritySpec::Euclidean),
        SimilarityKind::Linear => Ok(SimilaritySpec::Linear),
        SimilarityKind::Precomputed => {
            let m = matrix.ok_or_else(|| Error::Config("precomputed kernel needs kernel_matrix".into()))?;
            Ok(SimilaritySpec::Precomputed(m.clone()))
        }
    }
}

fn mse(preds: &[f64], targets: &[f64]) -> f64 {
    preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / preds.len() as f64
}

fn scale_rows(rows: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let f = 1.0 / (d as f64).sqrt();
    rows.iter().map(|r| r[..d].iter().map(|v| v * f).collect()).collect()
}

fn slice_rows(rows: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r[..d].to_vec()).collect()
}

fn run_tabular_split(
    cfg: &ExperimentConfig,
    dataset_name: &str,
    ds: &Dataset,
    matrix: Option<&Arc<SimilarityMatrix>>,
    split_idx: usize,
) -> Result<(Vec<ResultRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let precomputed = SimilarityKind::parse(&cfg.kernel)? == SimilarityKind::Precomputed;

    let (train_raw, test_raw) = data::split(ds, cfg.test_fraction, data::subseed(cfg.seed, "split", split_idx as u64))?;

    // per-split preprocessing, fitted on the train side only
    let feature_mode = if cfg.scale_features && !precomputed { FeatureScaling::ZScore } else { FeatureScaling::None };
    let target_mode = if cfg.task == Task::Regression && cfg.scale_targets {
        TargetScaling::MinMax01
    } else {
        TargetScaling::None
    };
    if cfg.scale_features && precomputed {
        warnings.push(format!("split {split_idx}: feature scaling skipped for precomputed kernel"));
    }
    let (train, params) = data::scale(&train_raw, feature_mode, target_mode);
    let test = data::apply_scale(&test_raw, &params);

    let spec = resolve_spec(cfg, &train.features, matrix)?;

    // one landmark permutation per split; sweep entries use its prefixes
    let max_requested = *cfg.landmarks.iter().max().expect("validated non-empty");
    let pool_cap = if cfg.double_dip { train.len() } else { train.len().saturating_sub(1) };
    let perm_len = max_requested.min(pool_cap);
    if perm_len == 0 {
        return Err(Error::Data(format!("split {split_idx}: training side too small for any landmarks")));
    }
    let perm = sample_landmark_indices(train.len(), perm_len, data::subseed(cfg.seed, "landmarks", split_idx as u64))?;

    // in pool mode the landmark prefix is held out of the labeled training set
    // for every sweep entry, so curves vary only in the landmark count
    let erm_idx: Vec<usize> = if cfg.double_dip {
        (0..train.len()).collect()
    } else {
        let held: std::collections::HashSet<usize> = perm.iter().cloned().collect();
        (0..train.len()).filter(|i| !held.contains(i)).collect()
    };
    let erm_x: Vec<Vec<f64>> = erm_idx.iter().map(|&i| train.features[i].clone()).collect();
    let erm_y: Vec<f64> = erm_idx.iter().map(|&i| train.targets[i]).collect();

    let solver = SolverParams { max_iters: cfg.iters, seed: data::subseed(cfg.seed, "solver", split_idx as u64) };
    let metric = Metric::for_task(cfg.task);
    let record = |method: Method, landmarks: usize, value: f64| ResultRecord {
        dataset: dataset_name.to_string(),
        kernel: cfg.kernel.clone(),
        method,
        landmarks,
        split: split_idx,
        metric,
        value,
    };

    // baseline ignores landmarks entirely; computed once per split
    let kr_value = if cfg.methods.contains(&Method::Kr) {
        let kr = match cfg.task {
            Task::Ordinal => {
                let r = ds.targets.iter().cloned().fold(0.0, f64::max) as usize;
                KrModel::new(erm_x.clone(), erm_y.clone(), spec.clone(), Some(r))?
            }
            _ => KrModel::new(erm_x.clone(), erm_y.clone(), spec.clone(), None)?,
        };
        let preds: Vec<f64> = test.features.iter().map(|x| kr.predict(x)).collect::<Result<_>>()?;
        Some(match cfg.task {
            Task::Regression => mse(&preds, &test.targets),
            Task::Ordinal => {
                let pred_labels: Vec<usize> = preds.iter().map(|&p| p as usize).collect();
                let test_labels = test.ordinal_labels()?;
                ordinal_errors(&pred_labels, &test_labels)?.0
            }
            Task::Ranking => unreachable!("ranking handled separately"),
        })
    } else {
        None
    };

    // full similarity rows against the longest landmark prefix, sliced per sweep entry
    let landmark_vectors: Vec<Vec<f64>> = perm.iter().map(|&i| train.features[i].clone()).collect();
    let mode = if cfg.double_dip { LandmarkMode::DoubleDip } else { LandmarkMode::UnlabeledPool };
    let full_embedder = Embedder::new(spec.clone(), landmark_vectors, Normalization::Unscaled)?.with_mode(mode);
    let erm_full = full_embedder.embed_all(&erm_x)?;
    let test_full = full_embedder.embed_all(&test.features)?;

    for &d in &cfg.landmarks {
        if d > perm_len {
            warnings.push(format!(
                "split {split_idx}: cell with {d} landmarks skipped; only {perm_len} available"
            ));
            continue;
        }
        if let Some(v) = kr_value {
            records.push(record(Method::Kr, d, v));
        }
        for method in &cfg.methods {
            match method {
                Method::Kr => {}
                Method::Regland => {
                    let x_train = scale_rows(&erm_full, d);
                    let x_test = scale_rows(&test_full, d);
                    let model = fit_dense(&x_train, &erm_y, cfg.b, cfg.eps, &solver)?;
                    let preds: Vec<f64> = x_test.iter().map(|x| model.predict(x)).collect::<Result<_>>()?;
                    records.push(record(Method::Regland, d, mse(&preds, &test.targets)));
                }
                Method::ReglandSp => {
                    let x_train = slice_rows(&erm_full, d);
                    let x_test = slice_rows(&test_full, d);
                    let mut fgs = FgsConfig::squared_fully_corrective(cfg.c_w, cfg.fgs_tolerance);
                    // sweep the sparsity budget with the landmark count unless pinned
                    fgs.max_sparsity = Some(cfg.k.unwrap_or(d));
                    let (model, _) = fit_fgs(&x_train, &erm_y, &fgs)?;
                    let preds: Vec<f64> = x_test.iter().map(|x| model.predict(x)).collect::<Result<_>>()?;
                    records.push(record(Method::ReglandSp, d, mse(&preds, &test.targets)));
                }
                Method::Orland => {
                    let x_train = scale_rows(&erm_full, d);
                    let x_test = scale_rows(&test_full, d);
                    let labels = erm_y.iter().map(|&y| y as usize).collect::<Vec<_>>();
                    let r = ds.targets.iter().cloned().fold(0.0, f64::max) as usize;
                    let model = ordinal::fit_ordinal(&x_train, &labels, r, cfg.b, cfg.gamma, &solver)?;
                    let preds: Vec<usize> =
                        x_test.iter().map(|x| model.predict_label(x)).collect::<Result<_>>()?;
                    let test_labels = test.ordinal_labels()?;
                    records.push(record(Method::Orland, d, ordinal_errors(&preds, &test_labels)?.0));
                }
                Method::Rank => unreachable!("validated against task"),
            }
        }
    }
    Ok((records, warnings))
}

fn run_ranking_split(
    cfg: &ExperimentConfig,
    dataset_name: &str,
    instances: &[RankingInstance],
    split_idx: usize,
) -> Result<(Vec<ResultRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let (train, test) =
        ranking::split_instances(instances, cfg.test_fraction, data::subseed(cfg.seed, "split", split_idx as u64))?;

    // landmarks come from the pooled training documents; instances stay whole
    let pool: Vec<Vec<f64>> = train.iter().flat_map(|i| i.documents.iter().cloned()).collect();
    let spec = resolve_spec(cfg, &pool, None)?;
    let max_requested = *cfg.landmarks.iter().max().expect("validated non-empty");
    let perm_len = max_requested.min(pool.len());
    let perm = sample_landmark_indices(pool.len(), perm_len, data::subseed(cfg.seed, "landmarks", split_idx as u64))?;
    let solver = SolverParams { max_iters: cfg.iters, seed: data::subseed(cfg.seed, "solver", split_idx as u64) };

    for &d in &cfg.landmarks {
        if d > perm_len {
            warnings.push(format!(
                "split {split_idx}: cell with {d} landmarks skipped; only {perm_len} available"
            ));
            continue;
        }
        let landmarks: Vec<Vec<f64>> = perm[..d].iter().map(|&i| pool[i].clone()).collect();
        let embedder = Embedder::new(spec.clone(), landmarks, Normalization::Scaled)?;
        let fit = ranking::fit_ranker(&train, &embedder, cfg.b, &solver)?;
        if fit.skipped_instances > 0 {
            warnings.push(format!(
                "split {split_idx}: {} training instances without positive gain skipped",
                fit.skipped_instances
            ));
        }
        let value = ranking::eval_ranking(&fit.model, &test, &embedder)?;
        records.push(ResultRecord {
            dataset: dataset_name.to_string(),
            kernel: cfg.kernel.clone(),
            method: Method::Rank,
            landmarks: d,
            split: split_idx,
            metric: Metric::Ndcg,
            value,
        });
    }
    Ok((records, warnings))
}

/// Group statistics over splits: sample mean and (n-1)-denominator standard
/// deviation; a single value reports zero deviation with its n visible.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub kernel: String,
    pub method: Method,
    pub landmarks: usize,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, Method, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.kernel.clone(), r.method, r.landmarks))
            .or_default()
            .push(r.value);
    }
    groups
        .into_iter()
        .map(|((dataset, kernel, method, landmarks), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { dataset, kernel, method, landmarks, n, mean, std }
        })
        .collect()
}

pub fn records_to_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from("dataset,kernel,method,landmarks,split,metric,value\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.dataset, r.kernel, r.method, r.landmarks, r.split, r.metric, r.value
        ));
    }
    out
}

pub fn parse_records_csv(text: &str) -> Result<Vec<ResultRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Data("empty records file".into()))?;
    if header != "dataset,kernel,method,landmarks,split,metric,value" {
        return Err(Error::Data(format!("unrecognized records header {header:?}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(Error::Data(format!("bad record line {line:?}")));
            }
            Ok(ResultRecord {
                dataset: cells[0].to_string(),
                kernel: cells[1].to_string(),
                method: Method::parse(cells[2])?,
                landmarks: cells[3].parse().map_err(|_| Error::Data(format!("bad landmarks in {line:?}")))?,
                split: cells[4].parse().map_err(|_| Error::Data(format!("bad split in {line:?}")))?,
                metric: Metric::parse(cells[5])?,
                value: cells[6].parse().map_err(|_| Error::Data(format!("bad value in {line:?}")))?,
            })
        })
        .collect()
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("dataset,kernel,method,landmarks,n,mean,std\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.dataset, r.kernel, r.method, r.landmarks, r.n, r.mean, r.std
        ));
    }
    out
}

/// Plot-ready blocks: one `# dataset kernel method` comment per curve
/// followed by `landmarks mean std` triples, blocks blank-line separated.
pub fn summary_to_plotdata(rows: &[SummaryRow]) -> String {
    let mut blocks: BTreeMap<(String, String, Method), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        blocks.entry((r.dataset.clone(), r.kernel.clone(), r.method)).or_default().push(r);
    }
    let mut out = String::new();
    let mut first = true;
    for ((dataset, kernel, method), mut group) in blocks {
        if !first {
            out.push('\n');
        }
        first = false;
        group.sort_by_key(|r| r.landmarks);
        out.push_str(&format!("# {dataset} {kernel} {method}\n"));
        for r in group {
            out.push_str(&format!("{} {} {}\n", r.landmarks, r.mean, r.std));
        }
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::io::Write;

    fn synthetic_regression_csv(n: usize, seed: u64) -> tempfile::NamedTempFile {
        let mut rng = crate::data::rng(seed);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let y = (a - 0.3 * b).tanh() + 0.05 * rng.gen_range(-1.0..1.0);
            writeln!(f, "{a},{b},{y}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    fn quick_config(path: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_dataset(path);
        cfg.landmarks = vec![3, 6];
        cfg.num_splits = 2;
        cfg.iters = 60;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn record_cardinality_and_kr_constant_across_landmarks() {
        let f = synthetic_regression_csv(40, 1);
        let mut cfg = quick_config(f.path().to_str().unwrap());
        cfg.methods = vec![Method::Kr, Method::Regland];
        let out = run_bench(&cfg).unwrap();
        // 2 landmark counts x 2 splits x 2 methods
        assert_eq!(out.records.len(), 8);
        assert!(out.warnings.is_empty());
        for split in 0..2 {
            let kr: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.method == Method::Kr && r.split == split)
                .map(|r| r.value)
                .collect();
            assert_eq!(kr.len(), 2);
            assert_eq!(kr[0], kr[1]);
        }
        for r in &out.records {
            assert_eq!(r.metric, Metric::Mse);
            assert!(r.value.is_finite());
        }
    }

    #[test]
    fn same_seed_gives_identical_csv() {
        let f = synthetic_regression_csv(36, 2);
        let cfg = quick_config(f.path().to_str().unwrap());
        let a = records_to_csv(&run_bench(&cfg).unwrap().records);
        let b = records_to_csv(&run_bench(&cfg).unwrap().records);
        assert_eq!(a, b);
        let mut cfg2 = cfg.clone();
        cfg2.seed = 12;
        let c = records_to_csv(&run_bench(&cfg2).unwrap().records);
        assert_ne!(a, c);
    }

    #[test]
    fn oversized_landmark_cells_are_skipped_with_warnings() {
        let f = synthetic_regression_csv(20, 3);
        let mut cfg = quick_config(f.path().to_str().unwrap());
        cfg.methods = vec![Method::Regland];
        cfg.landmarks = vec![4, 500];
        let out = run_bench(&cfg).unwrap();
        assert_eq!(out.records.len(), 2); // only the d=4 cells
        assert_eq!(out.warnings.len(), 2);
        assert!(out.warnings[0].contains("skipped"));
    }

    #[test]
    fn ordinal_task_runs_with_binning() {
        let f = synthetic_regression_csv(60, 4);
        let mut cfg = quick_config(f.path().to_str().unwrap());
        cfg.task = Task::Ordinal;
        cfg.methods = vec![Method::Kr, Method::Orland];
        cfg.bins = Some(3);
        let out = run_bench(&cfg).unwrap();
        assert_eq!(out.records.len(), 8);
        for r in &out.records {
            assert_eq!(r.metric, Metric::Aae);
            assert!(r.value >= 0.0);
        }
    }

    #[test]
    fn ranking_task_round_trip() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let mut rng = crate::data::rng(9);
        for q in 0..12 {
            for _ in 0..4 {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let rel = if x > 0.0 { 1.0 } else { 0.0 };
                writeln!(f, "q{q},{x},{rel}").unwrap();
            }
        }
        f.flush().unwrap();
        let mut cfg = ExperimentConfig::for_dataset(f.path().to_str().unwrap());
        cfg.task = Task::Ranking;
        cfg.methods = vec![Method::Rank];
        cfg.landmarks = vec![4];
        cfg.num_splits = 2;
        cfg.iters = 200;
        let out = run_bench(&cfg).unwrap();
        assert_eq!(out.records.len(), 2);
        for r in &out.records {
            assert_eq!(r.metric, Metric::Ndcg);
            assert!((-1.0..=0.0).contains(&r.value));
        }
    }

    #[test]
    fn precomputed_matrix_reproduces_the_direct_kernel_run() {
        // gram matrix of a gaussian kernel over the raw points; running with
        // kernel=precomputed must give the same numbers as the direct kernel
        let mut rng = crate::data::rng(77);
        let points: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let targets: Vec<f64> = points.iter().map(|p| (p[0] - p[1]).tanh()).collect();
        let spec = crate::similarity::SimilaritySpec::gaussian(0.9).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let data_path = dir.path().join("points.csv");
        let mut data_text = String::new();
        for (p, t) in points.iter().zip(&targets) {
            data_text.push_str(&format!("{},{},{t}\n", p[0], p[1]));
        }
        std::fs::write(&data_path, data_text).unwrap();

        let matrix_path = dir.path().join("gram.csv");
        let mut matrix_text = String::new();
        for a in &points {
            let row: Vec<String> =
                points.iter().map(|b| spec.evaluate(a, b).unwrap().to_string()).collect();
            matrix_text.push_str(&format!("{}\n", row.join(",")));
        }
        std::fs::write(&matrix_path, matrix_text).unwrap();

        let mut direct = ExperimentConfig::for_dataset(data_path.to_str().unwrap().to_string());
        direct.kernel = "gaussian".into();
        direct.kernel_sigma = Some(0.9);
        direct.scale_features = false;
        direct.methods = vec![Method::Kr, Method::Regland];
        direct.landmarks = vec![5];
        direct.num_splits = 2;
        direct.iters = 100;
        direct.seed = 31;

        let mut pre = direct.clone();
        pre.kernel = "precomputed".into();
        pre.kernel_matrix = Some(matrix_path.to_str().unwrap().to_string());

        let a = run_bench(&direct).unwrap().records;
        let b = run_bench(&pre).unwrap().records;
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.method, x.landmarks, x.split), (y.method, y.landmarks, y.split));
            assert_eq!(x.value, y.value, "{} differs: {} vs {}", x.method, x.value, y.value);
        }
    }

    #[test]
    fn config_validation_rejects_mismatches() {
        let mut cfg = ExperimentConfig::for_dataset("x.csv");
        cfg.methods = vec![Method::Orland];
        assert!(cfg.validate().is_err()); // orland on regression

        let mut cfg = ExperimentConfig::for_dataset("x.csv");
        cfg.task = Task::Ordinal;
        cfg.methods = vec![Method::ReglandSp];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_dataset("x.csv");
        cfg.kernel = "precomputed".into();
        assert!(cfg.validate().is_err()); // no matrix

        let mut cfg = ExperimentConfig::for_dataset("x.csv");
        cfg.test_fraction = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_dataset("x.csv");
        cfg.bins = Some(4);
        assert!(cfg.validate().is_err()); // bins on regression
    }

    #[test]
    fn config_json_round_trip_with_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"dataset":"d.csv","seed":7,"landmarks":[5]}"#).unwrap();
        assert_eq!(cfg.num_splits, 5);
        assert_eq!(cfg.test_fraction, 0.3);
        assert_eq!(cfg.b, 10.0);
        assert_eq!(cfg.landmarks, vec![5]);
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back.seed, 7);
        assert!(ExperimentConfig::from_json(r#"{"dataset":"d.csv","no_such_key":1}"#).is_err());
    }

    #[test]
    fn paper_defaults_set_the_table_protocol() {
        let mut cfg = ExperimentConfig::for_dataset("d.csv");
        cfg.kernel_sigma = Some(2.0);
        cfg.num_splits = 3;
        cfg.apply_paper_defaults();
        assert_eq!(cfg.num_splits, 5);
        assert_eq!(cfg.landmarks, vec![50]);
        assert_eq!(cfg.kernel_sigma, None);
    }

    #[test]
    fn summarize_and_emit() {
        let rec = |method, landmarks, split, value| ResultRecord {
            dataset: "d".into(),
            kernel: "manhattan".into(),
            method,
            landmarks,
            split,
            metric: Metric::Mse,
            value,
        };
        let records =
            vec![rec(Method::Kr, 5, 0, 1.0), rec(Method::Kr, 5, 1, 3.0), rec(Method::Regland, 5, 0, 2.0)];
        let summary = summarize(&records);
        assert_eq!(summary.len(), 2);
        let kr = summary.iter().find(|s| s.method == Method::Kr).unwrap();
        assert_eq!(kr.mean, 2.0);
        assert!((kr.std - (2.0f64).sqrt()).abs() < 1e-12);
        let single = summary.iter().find(|s| s.method == Method::Regland).unwrap();
        assert_eq!((single.n, single.std), (1, 0.0));

        // identical values give zero deviation
        let same = summarize(&[rec(Method::Kr, 5, 0, 1.5), rec(Method::Kr, 5, 1, 1.5)]);
        assert_eq!(same[0].std, 0.0);

        let plot = summary_to_plotdata(&summary);
        assert_eq!(plot.matches('#').count(), 2);
        assert!(plot.contains("# d manhattan kr\n5 2 "));

        let csv = records_to_csv(&records);
        let parsed = parse_records_csv(&csv).unwrap();
        assert_eq!(parsed, records);
        assert_eq!(parse_records_csv("dataset,kernel,method,landmarks,split,metric,value\n").unwrap(), vec![]);
    }
}
