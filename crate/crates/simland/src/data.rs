//! Dataset ingestion, preprocessing, splitting, and deterministic randomness.
//!
//! Every random choice in the crate flows through [`rng`] or [`subrng`].
//! Sub-seeds are derived per purpose and index, so the order in which
//! parallel work executes can never change a result.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic generator from a 64-bit seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a named purpose and index.
pub fn subseed(seed: u64, purpose: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(seed ^ h.rotate_left(17) ^ splitmix(index))
}

/// Generator for a named purpose, independent of any other purpose or index.
pub fn subrng(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    rng(subseed(seed, purpose, index))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The learning problem a dataset is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Ordinal,
    Ranking,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Ordinal => "ordinal",
            Task::Ranking => "ranking",
        }
    }
}

/// Where a dataset came from and what was done to it.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub source: String,
    pub log: Vec<String>,
}

/// An in-memory labeled dataset: n feature rows plus one target per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub task: Task,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>, task: Task) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if features.len() != targets.len() {
            return Err(Error::Data(format!(
                "feature rows ({}) and targets ({}) differ in count",
                features.len(),
                targets.len()
            )));
        }
        let p = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Data(format!("row {i} has {} features, expected {p}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} contains a non-finite feature")));
            }
        }
        if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("target {i} is non-finite")));
        }
        Ok(Dataset { features, targets, task, provenance: Provenance::default() })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Targets reinterpreted as ordinal labels in {1..r}.
    pub fn ordinal_labels(&self) -> Result<Vec<usize>> {
        self.targets
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

    fn log(&mut self, entry: impl Into<String>) {
        self.provenance.log.push(entry.into());
    }
}

/// Header handling for CSV ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderMode {
    /// Treat the first row as a header when any of its cells is non-numeric.
    Auto,
    Yes,
    No,
}

/// Loads a rectangular numeric CSV; the last column is the target.
pub fn load_csv(path: impl AsRef<Path>, header: HeaderMode) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let first = lines.next().ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let first_cells: Vec<&str> = first.1.split(',').map(str::trim).collect();
    let first_is_header = match header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => first_cells.iter().any(|c| c.parse::<f64>().is_err()),
    };

    let width = first_cells.len();
    if width < 2 {
        return Err(Error::Data(format!(
            "{}: need at least one feature column and one target column, got {width}",
            path.display()
        )));
    }

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut push_row = |lineno: usize, line: &str| -> Result<()> {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(Error::Data(format!(
                "{}: line {} has {} cells, expected {width}",
                path.display(),
                lineno + 1,
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(width - 1);
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!("{}: non-numeric cell {:?} at line {}", path.display(), cell, lineno + 1))
            })?;
            if col + 1 == width {
                targets.push(v);
            } else {
                row.push(v);
            }
        }
        features.push(row);
        Ok(())
    };

    if !first_is_header {
        push_row(first.0, first.1)?;
    }
    for (lineno, line) in lines {
        push_row(lineno, line)?;
    }

    let mut ds = Dataset::new(features, targets, Task::Regression)?;
    ds.provenance.source = path.display().to_string();
    ds.log(format!("loaded {} rows x {} features from {}", ds.len(), ds.dim(), path.display()));
    Ok(ds)
}

/// Loads a feature-only CSV (no target column), same header handling as
/// [`load_csv`].
pub fn load_features_csv(path: impl AsRef<Path>, header: HeaderMode) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(Error::Data(format!(
                "{}: line {} has {} cells, expected {w}",
                path.display(),
                lineno + 1,
                cells.len()
            )));
        }
        let parsed: Option<Vec<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        match parsed {
            Some(row) => rows.push(row),
            None => {
                let header_allowed = matches!(header, HeaderMode::Auto | HeaderMode::Yes);
                if !(rows.is_empty() && header_allowed) {
                    return Err(Error::Data(format!("{}: non-numeric cell at line {}", path.display(), lineno + 1)));
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no feature rows", path.display())));
    }
    Ok(rows)
}

/// Writes features-then-target rows, no header. Values round-trip exactly.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (row, target) in ds.features.iter().zip(&ds.targets) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{target}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads grouped ranking data: columns `qid, f1..fd, rel`, where consecutive
/// rows sharing a qid form one instance. Relevances are rescaled so the
/// global maximum is at most 1.
pub fn load_ranking_csv(path: impl AsRef<Path>, header: HeaderMode) -> Result<Vec<crate::ranking::RankingInstance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows: Vec<(String, Vec<f64>, f64)> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() < 3 {
            return Err(Error::Data(format!(
                "{}: line {} needs qid, at least one feature, and a relevance column",
                path.display(),
                lineno + 1
            )));
        }
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(Error::Data(format!(
                "{}: line {} has {} cells, expected {w}",
                path.display(),
                lineno + 1,
                cells.len()
            )));
        }
        let numeric: Option<Vec<f64>> = cells[1..].iter().map(|c| c.parse::<f64>().ok()).collect();
        match numeric {
            Some(vals) => {
                let (rel, feats) = vals.split_last().expect("at least two numeric columns");
                rows.push((cells[0].to_string(), feats.to_vec(), *rel));
            }
            None => {
                let first_row = rows.is_empty();
                let header_allowed = matches!(header, HeaderMode::Auto | HeaderMode::Yes);
                if !(first_row && header_allowed) {
                    return Err(Error::Data(format!("{}: non-numeric cell at line {}", path.display(), lineno + 1)));
                }
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no ranking rows", path.display())));
    }

    let mut instances = Vec::new();
    let mut docs: Vec<Vec<f64>> = Vec::new();
    let mut rels: Vec<f64> = Vec::new();
    let mut current = rows[0].0.clone();
    for (qid, feats, rel) in rows {
        if qid != current {
            instances.push(crate::ranking::RankingInstance::new(current, std::mem::take(&mut docs), std::mem::take(&mut rels))?);
            current = qid;
        }
        docs.push(feats);
        rels.push(rel);
    }
    instances.push(crate::ranking::RankingInstance::new(current, docs, rels)?);
    crate::ranking::normalize_relevance(&mut instances);
    Ok(instances)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScaling {
    ZScore,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetScaling {
    MinMax01,
    None,
}

/// Scaling parameters fitted on a training split, applied anywhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleParams {
    pub feature_mode: FeatureScaling,
    pub target_mode: TargetScaling,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl ScaleParams {
    pub fn identity(dim: usize) -> Self {
        ScaleParams {
            feature_mode: FeatureScaling::None,
            target_mode: TargetScaling::None,
            feature_mean: vec![0.0; dim],
            feature_std: vec![1.0; dim],
            target_min: 0.0,
            target_max: 1.0,
        }
    }

    pub fn transform_features(&self, x: &[f64]) -> Vec<f64> {
        match self.feature_mode {
            FeatureScaling::None => x.to_vec(),
            FeatureScaling::ZScore => x
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let s = self.feature_std[j];
                    if s == 0.0 {
                        0.0
                    } else {
                        (v - self.feature_mean[j]) / s
                    }
                })
                .collect(),
        }
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        match self.target_mode {
            TargetScaling::None => y,
            TargetScaling::MinMax01 => {
                let range = self.target_max - self.target_min;
                if range == 0.0 {
                    0.0
                } else {
                    (y - self.target_min) / range
                }
            }
        }
    }

    /// Maps a scaled target back to the original units.
    pub fn invert_target(&self, y: f64) -> f64 {
        match self.target_mode {
            TargetScaling::None => y,
            TargetScaling::MinMax01 => y * (self.target_max - self.target_min) + self.target_min,
        }
    }
}

/// Fits scaling on `train` only and returns the transformed dataset plus the
/// parameters to apply elsewhere. Z-scored constant columns map to zero;
/// constant targets map to zero under min-max.
pub fn scale(train: &Dataset, feature_mode: FeatureScaling, target_mode: TargetScaling) -> (Dataset, ScaleParams) {
    let params = fit_scale(train, feature_mode, target_mode);
    (apply_scale(train, &params), params)
}

pub fn fit_scale(train: &Dataset, feature_mode: FeatureScaling, target_mode: TargetScaling) -> ScaleParams {
    let n = train.len() as f64;
    let p = train.dim();
    let mut mean = vec![0.0; p];
    let mut std = vec![1.0; p];
    if feature_mode == FeatureScaling::ZScore {
        for row in &train.features {
            for (j, v) in row.iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; p];
        for row in &train.features {
            for (j, v) in row.iter().enumerate() {
                var[j] += (v - mean[j]) * (v - mean[j]);
            }
        }
        for (j, v) in var.iter().enumerate() {
            std[j] = (v / n).sqrt();
        }
    }
    let (mut tmin, mut tmax) = (0.0, 1.0);
    if target_mode == TargetScaling::MinMax01 {
        tmin = train.targets.iter().cloned().fold(f64::INFINITY, f64::min);
        tmax = train.targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    ScaleParams {
        feature_mode,
        target_mode,
        feature_mean: mean,
        feature_std: std,
        target_min: tmin,
        target_max: tmax,
    }
}

pub fn apply_scale(ds: &Dataset, params: &ScaleParams) -> Dataset {
    let features = ds.features.iter().map(|r| params.transform_features(r)).collect();
    let targets = ds.targets.iter().map(|&y| params.transform_target(y)).collect();
    let mut out = Dataset { features, targets, task: ds.task, provenance: ds.provenance.clone() };
    out.log(format!(
        "scaled features={:?} targets={:?} with train-fitted params",
        params.feature_mode, params.target_mode
    ));
    out
}

/// Equi-frequency binning of real targets into ordinal labels {1..r}.
///
/// Bin edges sit at the empirical k/r quantiles. Ties that straddle an edge
/// land in the lower bin, so counts can deviate by the number of tied values.
pub fn equifreq_bin(targets: &[f64], r: usize) -> Result<Vec<usize>> {
    let edges = equifreq_edges(targets, r)?;
    Ok(targets.iter().map(|&y| bin_with_edges(y, &edges)).collect())
}

/// The r-1 empirical quantile cut points used by [`equifreq_bin`].
pub fn equifreq_edges(targets: &[f64], r: usize) -> Result<Vec<f64>> {
    let n = targets.len();
    if r < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {r}")));
    }
    if n < r {
        return Err(Error::Data(format!("cannot split {n} values into {r} bins")));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Data("cannot bin non-finite targets".into()));
    }
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = 1;
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            distinct += 1;
        }
    }
    if distinct < r {
        return Err(Error::Data(format!("{distinct} distinct values cannot fill {r} bins")));
    }
    Ok((1..r).map(|k| sorted[k * n / r - 1]).collect())
}

/// Label of a value under precomputed cut points: one plus the number of
/// edges it strictly exceeds.
pub fn bin_with_edges(y: f64, edges: &[f64]) -> usize {
    1 + edges.iter().filter(|&&e| y > e).count()
}

/// Outcome of converting raw targets to ordinal labels. Exactly one of
/// `original_values` (native labels, position = contiguous label - 1) and
/// `bin_edges` (equi-frequency cut points) is set, so the same conversion
/// can be replayed on fresh targets.
#[derive(Debug, Clone)]
pub struct OrdinalizedTargets {
    pub labels: Vec<usize>,
    pub original_values: Option<Vec<f64>>,
    pub bin_edges: Option<Vec<f64>>,
    pub log: String,
}

/// Turns raw targets into ordinal labels: explicit equi-frequency binning
/// when `bins` is set, native labels remapped to contiguous {1..r} when the
/// targets are already integral, and 10-bin conversion for continuous
/// targets otherwise.
pub fn ordinalize(targets: &[f64], bins: Option<usize>) -> Result<OrdinalizedTargets> {
    match bins {
        Some(r) => {
            let edges = equifreq_edges(targets, r)?;
            let labels = targets.iter().map(|&y| bin_with_edges(y, &edges)).collect();
            Ok(OrdinalizedTargets {
                labels,
                original_values: None,
                bin_edges: Some(edges),
                log: format!("equi-frequency binned targets into {r} labels"),
            })
        }
        None if targets.iter().all(|t| t.fract() == 0.0) => {
            let (labels, values) = remap_labels(targets)?;
            let log = format!("remapped native label values {values:?} to {{1..{}}}", values.len());
            Ok(OrdinalizedTargets { labels, original_values: Some(values), bin_edges: None, log })
        }
        None => {
            let edges = equifreq_edges(targets, 10)?;
            let labels = targets.iter().map(|&y| bin_with_edges(y, &edges)).collect();
            Ok(OrdinalizedTargets {
                labels,
                original_values: None,
                bin_edges: Some(edges),
                log: "equi-frequency binned continuous targets into 10 labels".into(),
            })
        }
    }
}

/// Remaps arbitrary finite label values to contiguous {1..r} by sorted order.
/// Returns the labels and the original value for each new label.
pub fn remap_labels(targets: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Data("cannot remap non-finite labels".into()));
    }
    let mut values: Vec<f64> = targets.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.len() < 2 {
        return Err(Error::Data("ordinal data needs at least two distinct labels".into()));
    }
    let labels = targets
        .iter()
        .map(|t| values.binary_search_by(|v| v.total_cmp(t)).expect("value came from targets") + 1)
        .collect();
    Ok((labels, values))
}

/// Random split into disjoint, exhaustive train/test parts. The test side
/// gets `ceil(fraction * n)` rows; deterministic per seed.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let n = ds.len();
    let n_test = (test_fraction * n as f64).ceil() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Data(format!("test fraction {test_fraction} leaves an empty side for {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng(seed);
    for i in 0..n {
        let j = r.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut test_idx: Vec<usize> = idx[..n_test].to_vec();
    let mut train_idx: Vec<usize> = idx[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    let take = |ids: &[usize], side: &str| {
        let features = ids.iter().map(|&i| ds.features[i].clone()).collect();
        let targets = ids.iter().map(|&i| ds.targets[i]).collect();
        let mut part = Dataset { features, targets, task: ds.task, provenance: ds.provenance.clone() };
        part.log(format!("{side} split of {} rows (seed {seed}, fraction {test_fraction})", ids.len()));
        part
    };
    Ok((take(&train_idx, "train"), take(&test_idx, "test")))
}
