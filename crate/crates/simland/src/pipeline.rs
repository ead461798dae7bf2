//! Self-contained train/predict/eval pipelines behind the CLI.
//!
//! Training on a whole dataset produces the flat-text model file plus a JSON
//! sidecar holding everything prediction needs: the kernel, the landmark
//! vectors, the normalization, and the scaling parameters fitted on the
//! training data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{ExperimentConfig, Method, Metric};
use crate::data::{self, Dataset, FeatureScaling, HeaderMode, ScaleParams, Task, TargetScaling};
use crate::embedding::{sample_landmark_indices, Embedder, LandmarkMode, Normalization};
use crate::error::{Error, Result};
use crate::optim::SolverParams;
use crate::ordinal::{self, OrdinalModel};
use crate::ranking;
use crate::regression::{fit_dense, LinearModel};
use crate::similarity::{SimilarityKind, SimilarityMatrix, SimilaritySpec};
use crate::sparse::{fit_fgs, FgsConfig};

/// Sidecar serialized next to a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub task: Task,
    pub method: Method,
    pub kernel: String,
    #[serde(default)]
    pub kernel_params: std::collections::BTreeMap<String, f64>,
    #[serde(default)]
    pub kernel_matrix: Option<String>,
    pub normalization: String,
    pub landmarks: Vec<Vec<f64>>,
    pub scale: ScaleParams,
    #[serde(default)]
    pub num_labels: Option<usize>,
    /// Original label value per contiguous ordinal label, when training
    /// remapped native labels.
    #[serde(default)]
    pub label_values: Option<Vec<f64>>,
    /// Quantile cut points, when training binned raw targets.
    #[serde(default)]
    pub bin_edges: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Linear(LinearModel),
    Ordinal(OrdinalModel),
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub spec: PipelineSpec,
    pub model: TrainedModel,
}

fn sidecar_path(model_path: &Path) -> std::path::PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".pipeline.json");
    std::path::PathBuf::from(s)
}

fn build_spec(spec: &PipelineSpec) -> Result<SimilaritySpec> {
    let kind = SimilarityKind::parse(&spec.kernel)?;
    match kind {
        SimilarityKind::Sigmoid => Ok(SimilaritySpec::Sigmoid {
            a: *spec.kernel_params.get("a").ok_or_else(|| Error::Config("sigmoid sidecar missing a".into()))?,
            r: *spec.kernel_params.get("r").ok_or_else(|| Error::Config("sigmoid sidecar missing r".into()))?,
        }),
        SimilarityKind::Gaussian => SimilaritySpec::gaussian(
            *spec.kernel_params.get("sigma").ok_or_else(|| Error::Config("gaussian sidecar missing sigma".into()))?,
        ),
        SimilarityKind::Manhattan => Ok(SimilaritySpec::Manhattan),
        SimilarityKind::Euclidean => Ok(SimilaritySpec::Euclidean),
        SimilarityKind::Linear => Ok(SimilaritySpec::Linear),
        SimilarityKind::Precomputed => {
            let path = spec
                .kernel_matrix
                .as_ref()
                .ok_or_else(|| Error::Config("precomputed sidecar missing kernel_matrix".into()))?;
            Ok(SimilaritySpec::Precomputed(std::sync::Arc::new(SimilarityMatrix::from_csv(path)?)))
        }
    }
}

impl Pipeline {
    /// Trains the configured method on the whole dataset (no splitting) and
    /// returns a self-contained pipeline. The method is the first
    /// landmark-based entry in `cfg.methods`.
    pub fn train(cfg: &ExperimentConfig) -> Result<Pipeline> {
        cfg.validate()?;
        let method = *cfg
            .methods
            .iter()
            .find(|m| **m != Method::Kr)
            .ok_or_else(|| Error::Config("training needs a landmark-based method (kr has no model file)".into()))?;
        if cfg.task == Task::Ranking {
            return Self::train_ranking(cfg, method);
        }

        let (ds, ordinal_info) = prepare(cfg)?;
        let precomputed = SimilarityKind::parse(&cfg.kernel)? == SimilarityKind::Precomputed;
        let feature_mode =
            if cfg.scale_features && !precomputed { FeatureScaling::ZScore } else { FeatureScaling::None };
        let target_mode = if cfg.task == Task::Regression && cfg.scale_targets {
            TargetScaling::MinMax01
        } else {
            TargetScaling::None
        };
        let (scaled, scale_params) = data::scale(&ds, feature_mode, target_mode);

        let matrix = match &cfg.kernel_matrix {
            Some(p) if precomputed => Some(std::sync::Arc::new(SimilarityMatrix::from_csv(p)?)),
            _ => None,
        };
        let spec = resolve(cfg, &scaled.features, matrix)?;

        let max_d = *cfg.landmarks.iter().max().expect("validated");
        let cap = if cfg.double_dip { scaled.len() } else { scaled.len().saturating_sub(1) };
        let d = max_d.min(cap);
        if d == 0 {
            return Err(Error::Data("dataset too small to hold out any landmarks".into()));
        }
        let perm = sample_landmark_indices(scaled.len(), d, data::subseed(cfg.seed, "landmarks", 0))?;
        let landmark_vectors: Vec<Vec<f64>> = perm.iter().map(|&i| scaled.features[i].clone()).collect();
        let erm_idx: Vec<usize> = if cfg.double_dip {
            (0..scaled.len()).collect()
        } else {
            let held: std::collections::HashSet<usize> = perm.iter().cloned().collect();
            (0..scaled.len()).filter(|i| !held.contains(i)).collect()
        };
        if erm_idx.is_empty() {
            return Err(Error::Data("no training rows left after holding out landmarks".into()));
        }
        let erm_x: Vec<Vec<f64>> = erm_idx.iter().map(|&i| scaled.features[i].clone()).collect();
        let erm_y: Vec<f64> = erm_idx.iter().map(|&i| scaled.targets[i]).collect();
        let solver = SolverParams { max_iters: cfg.iters, seed: data::subseed(cfg.seed, "solver", 0) };

        let normalization = match method {
            Method::ReglandSp => Normalization::Unscaled,
            _ => Normalization::Scaled,
        };
        let mode = if cfg.double_dip { LandmarkMode::DoubleDip } else { LandmarkMode::UnlabeledPool };
        let embedder = Embedder::new(spec, landmark_vectors.clone(), normalization)?.with_mode(mode);
        let x_train = embedder.embed_all(&erm_x)?;

        let (model, num_labels) = match method {
            Method::Regland => (TrainedModel::Linear(fit_dense(&x_train, &erm_y, cfg.b, cfg.eps, &solver)?), None),
            Method::ReglandSp => {
                let mut fgs = FgsConfig::squared_fully_corrective(cfg.c_w, cfg.fgs_tolerance);
                fgs.max_sparsity = Some(cfg.k.unwrap_or(d));
                let (m, _) = fit_fgs(&x_train, &erm_y, &fgs)?;
                (TrainedModel::Linear(m), None)
            }
            Method::Orland => {
                let labels: Vec<usize> = erm_y.iter().map(|&y| y as usize).collect();
                let r = ds.targets.iter().cloned().fold(0.0, f64::max) as usize;
                let m = ordinal::fit_ordinal(&x_train, &labels, r, cfg.b, cfg.gamma, &solver)?;
                (TrainedModel::Ordinal(m), Some(r))
            }
            Method::Kr | Method::Rank => unreachable!("filtered above"),
        };

        Ok(Pipeline {
            spec: PipelineSpec {
                task: cfg.task,
                method,
                kernel: cfg.kernel.clone(),
                kernel_params: embedder.spec().params(),
                kernel_matrix: cfg.kernel_matrix.clone(),
                normalization: embedder.normalization().name().into(),
                landmarks: landmark_vectors,
                scale: scale_params,
                num_labels,
                label_values: ordinal_info.as_ref().and_then(|o| o.original_values.clone()),
                bin_edges: ordinal_info.as_ref().and_then(|o| o.bin_edges.clone()),
            },
            model,
        })
    }

    fn train_ranking(cfg: &ExperimentConfig, method: Method) -> Result<Pipeline> {
        if method != Method::Rank {
            return Err(Error::Config(format!("method {method} is not valid for ranking")));
        }
        let instances = data::load_ranking_csv(&cfg.dataset, HeaderMode::Auto)?;
        let pool: Vec<Vec<f64>> = instances.iter().flat_map(|i| i.documents.iter().cloned()).collect();
        let spec = resolve(cfg, &pool, None)?;
        let d = (*cfg.landmarks.iter().max().expect("validated")).min(pool.len());
        let perm = sample_landmark_indices(pool.len(), d, data::subseed(cfg.seed, "landmarks", 0))?;
        let landmark_vectors: Vec<Vec<f64>> = perm.iter().map(|&i| pool[i].clone()).collect();
        let embedder = Embedder::new(spec, landmark_vectors.clone(), Normalization::Scaled)?;
        let solver = SolverParams { max_iters: cfg.iters, seed: data::subseed(cfg.seed, "solver", 0) };
        let fit = ranking::fit_ranker(&instances, &embedder, cfg.b, &solver)?;
        Ok(Pipeline {
            spec: PipelineSpec {
                task: Task::Ranking,
                method,
                kernel: cfg.kernel.clone(),
                kernel_params: embedder.spec().params(),
                kernel_matrix: None,
                normalization: embedder.normalization().name().into(),
                landmarks: landmark_vectors,
                scale: ScaleParams::identity(pool.first().map_or(0, Vec::len)),
                num_labels: None,
                label_values: None,
                bin_edges: None,
            },
            model: TrainedModel::Linear(fit.model),
        })
    }

    /// Writes the model file and its `.pipeline.json` sidecar.
    pub fn save(&self, model_path: impl AsRef<Path>) -> Result<()> {
        let model_path = model_path.as_ref();
        match &self.model {
            TrainedModel::Linear(m) => m.save(model_path)?,
            TrainedModel::Ordinal(m) => m.save(model_path)?,
        }
        let sidecar = sidecar_path(model_path);
        let json = serde_json::to_string_pretty(&self.spec).expect("sidecar serializes");
        std::fs::write(&sidecar, json).map_err(|e| Error::io(sidecar.display().to_string(), e))
    }

    pub fn load(model_path: impl AsRef<Path>) -> Result<Pipeline> {
        let model_path = model_path.as_ref();
        let sidecar = sidecar_path(model_path);
        let text =
            std::fs::read_to_string(&sidecar).map_err(|e| Error::io(sidecar.display().to_string(), e))?;
        let spec: PipelineSpec =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("bad sidecar: {e}")))?;
        let model = match spec.method {
            Method::Orland => TrainedModel::Ordinal(OrdinalModel::load(model_path)?),
            _ => TrainedModel::Linear(LinearModel::load(model_path)?),
        };
        if let (Some(values), TrainedModel::Ordinal(m)) = (&spec.label_values, &model) {
            if values.len() != m.num_labels {
                return Err(Error::Data(format!(
                    "sidecar lists {} label values but the model has {} labels",
                    values.len(),
                    m.num_labels
                )));
            }
        }
        Ok(Pipeline { spec, model })
    }

    fn embedder(&self) -> Result<Embedder> {
        Embedder::new(
            build_spec(&self.spec)?,
            self.spec.landmarks.clone(),
            Normalization::parse(&self.spec.normalization)?,
        )
    }

    /// Predicts one value per feature row. Regression outputs are mapped back
    /// to original target units; ordinal outputs are labels, reported as the
    /// original label values when training remapped them.
    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        match &self.model {
            TrainedModel::Linear(m) => {
                let embedder = self.embedder()?;
                features
                    .iter()
                    .map(|x| {
                        let z = embedder.embed(&self.spec.scale.transform_features(x))?;
                        Ok(self.spec.scale.invert_target(m.predict(&z)?))
                    })
                    .collect()
            }
            TrainedModel::Ordinal(_) => Ok(self
                .predict_ordinal_labels(features)?
                .into_iter()
                .map(|l| match &self.spec.label_values {
                    Some(values) => values[l - 1],
                    None => l as f64,
                })
                .collect()),
        }
    }

    /// Ordinal predictions in the model's contiguous {1..r} label space.
    pub fn predict_ordinal_labels(&self, features: &[Vec<f64>]) -> Result<Vec<usize>> {
        let model = match &self.model {
            TrainedModel::Ordinal(m) => m,
            TrainedModel::Linear(_) => {
                return Err(Error::Config("model was not trained for an ordinal task".into()))
            }
        };
        let embedder = self.embedder()?;
        features
            .iter()
            .map(|x| model.predict_label(&embedder.embed(&self.spec.scale.transform_features(x))?))
            .collect()
    }

    /// Maps raw target values from an evaluation file into the model's
    /// contiguous label space, replaying whatever conversion training used.
    fn contiguous_labels(&self, targets: &[f64]) -> Result<Vec<usize>> {
        if let Some(edges) = &self.spec.bin_edges {
            return Ok(targets.iter().map(|&y| data::bin_with_edges(y, edges)).collect());
        }
        if let Some(values) = &self.spec.label_values {
            return targets
                .iter()
                .map(|t| {
                    values
                        .binary_search_by(|v| v.partial_cmp(t).unwrap())
                        .map(|i| i + 1)
                        .map_err(|_| Error::Data(format!("label value {t} was not seen during training")))
                })
                .collect();
        }
        targets
            .iter()
            .map(|&t| {
                if t.fract() != 0.0 || t < 1.0 {
                    Err(Error::Data(format!("target {t} is not an ordinal label in {{1..r}}")))
                } else {
                    Ok(t as usize)
                }
            })
            .collect()
    }

    /// Scores a labeled dataset; returns (metric, value) pairs.
    pub fn evaluate(&self, data_path: impl AsRef<Path>) -> Result<Vec<(Metric, f64)>> {
        match self.spec.task {
            Task::Ranking => {
                let instances = data::load_ranking_csv(data_path, HeaderMode::Auto)?;
                let model = match &self.model {
                    TrainedModel::Linear(m) => m,
                    TrainedModel::Ordinal(_) => return Err(Error::Config("ordinal model cannot rank".into())),
                };
                let loss = ranking::eval_ranking(model, &instances, &self.embedder()?)?;
                Ok(vec![(Metric::Ndcg, loss)])
            }
            Task::Regression => {
                let ds = data::load_csv(data_path, HeaderMode::Auto)?;
                let preds = self.predict(&ds.features)?;
                let n = preds.len() as f64;
                let mse = preds.iter().zip(&ds.targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
                Ok(vec![(Metric::Mse, mse)])
            }
            Task::Ordinal => {
                let ds = data::load_csv(data_path, HeaderMode::Auto)?;
                let preds = self.predict_ordinal_labels(&ds.features)?;
                let labels = self.contiguous_labels(&ds.targets)?;
                let (aae, mislabel) = ordinal::ordinal_errors(&preds, &labels)?;
                Ok(vec![(Metric::Aae, aae), (Metric::Mislabel, mislabel)])
            }
        }
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<(Dataset, Option<data::OrdinalizedTargets>)> {
    let mut ds = data::load_csv(&cfg.dataset, HeaderMode::Auto)?;
    ds.task = cfg.task;
    let mut ordinal_info = None;
    if cfg.task == Task::Ordinal {
        let ord = data::ordinalize(&ds.targets, cfg.bins)?;
        ds.provenance.log.push(ord.log.clone());
        ds.targets = ord.labels.iter().map(|&l| l as f64).collect();
        ordinal_info = Some(ord);
    }
    if SimilarityKind::parse(&cfg.kernel)? == SimilarityKind::Precomputed {
        ds.features = (0..ds.len()).map(crate::similarity::index_point).collect();
    }
    Ok((ds, ordinal_info))
}

fn resolve(
    cfg: &ExperimentConfig,
    features: &[Vec<f64>],
    matrix: Option<std::sync::Arc<SimilarityMatrix>>,
) -> Result<SimilaritySpec> {
    let kind = SimilarityKind::parse(&cfg.kernel)?;
    match kind {
        SimilarityKind::Sigmoid => {
            let p = features.first().map_or(0, Vec::len);
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
            None => SimilaritySpec::defaults(SimilarityKind::Gaussian, features),
        },
        SimilarityKind::Manhattan => Ok(SimilaritySpec::Manhattan),
        SimilarityKind::Euclidean => Ok(SimilaritySpec::Euclidean),
        SimilarityKind::Linear => Ok(SimilaritySpec::Linear),
        SimilarityKind::Precomputed => {
            let m = matrix.ok_or_else(|| Error::Config("precomputed kernel needs kernel_matrix".into()))?;
            Ok(SimilaritySpec::Precomputed(m))
        }
    }
}
