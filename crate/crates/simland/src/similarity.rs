//! Similarity functions, including indefinite ones.
//!
//! A similarity is any symmetric real-valued function of two points; positive
//! semi-definiteness is not assumed anywhere downstream. Built-in kinds cover
//! the usual suspects (sigmoid, manhattan, gaussian, euclidean, linear) plus
//! precomputed matrices addressed by point index, which is how graph or
//! network similarities come in.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Cap on the number of points enumerated when estimating the gaussian
/// bandwidth from pairwise distances. Above this, a fixed-seed uniform
/// subsample keeps the cost bounded.
pub const SIGMA_SAMPLE_CAP: usize = 2000;

const SIGMA_SAMPLE_SEED: u64 = 0x51_6d_a0_01;

/// Dense precomputed similarity matrix, addressed by integer point index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Builds from rows, checking squareness and finiteness.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Data("precomputed matrix is empty".into()));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Data(format!(
                    "precomputed matrix is not square: row {i} has {} columns, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Data(format!("precomputed matrix has non-finite entry {v} in row {i}")));
            }
        }
        Ok(SimilarityMatrix { values })
    }

    /// Loads a dense CSV of reals where cell (i, j) holds K(i, j).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Data(format!("non-numeric cell {:?} at line {}", cell.trim(), lineno + 1)))
                })
                .collect();
            rows.push(row?);
        }
        SimilarityMatrix::new(rows)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(Error::Data(format!("precomputed index ({i}, {j}) out of range for {n} points")));
        }
        Ok(self.values[i][j])
    }
}

/// Names the built-in similarity kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    Sigmoid,
    Manhattan,
    Gaussian,
    Euclidean,
    Linear,
    Precomputed,
}

impl SimilarityKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(SimilarityKind::Sigmoid),
            "manhattan" => Ok(SimilarityKind::Manhattan),
            "gaussian" => Ok(SimilarityKind::Gaussian),
            "euclidean" => Ok(SimilarityKind::Euclidean),
            "linear" => Ok(SimilarityKind::Linear),
            "precomputed" => Ok(SimilarityKind::Precomputed),
            other => Err(Error::Config(format!("unknown similarity kind {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimilarityKind::Sigmoid => "sigmoid",
            SimilarityKind::Manhattan => "manhattan",
            SimilarityKind::Gaussian => "gaussian",
            SimilarityKind::Euclidean => "euclidean",
            SimilarityKind::Linear => "linear",
            SimilarityKind::Precomputed => "precomputed",
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named similarity function with its parameters. Immutable once built;
/// evaluation is pure and thread-safe.
#[derive(Debug, Clone)]
pub enum SimilaritySpec {
    /// tanh(a <x, y> + r). Indefinite.
    Sigmoid { a: f64, r: f64 },
    /// Negative L1 distance. Indefinite.
    Manhattan,
    /// exp(-||x - y||^2 / (2 sigma^2)).
    Gaussian { sigma: f64 },
    /// Negative squared L2 distance. Indefinite.
    Euclidean,
    /// Plain inner product.
    Linear,
    /// Matrix lookup; points are single-element vectors carrying their index.
    Precomputed(Arc<SimilarityMatrix>),
}

impl SimilaritySpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("gaussian sigma must be positive and finite, got {sigma}")));
        }
        Ok(SimilaritySpec::Gaussian { sigma })
    }

    pub fn kind(&self) -> SimilarityKind {
        match self {
            SimilaritySpec::Sigmoid { .. } => SimilarityKind::Sigmoid,
            SimilaritySpec::Manhattan => SimilarityKind::Manhattan,
            SimilaritySpec::Gaussian { .. } => SimilarityKind::Gaussian,
            SimilaritySpec::Euclidean => SimilarityKind::Euclidean,
            SimilaritySpec::Linear => SimilarityKind::Linear,
            SimilaritySpec::Precomputed(_) => SimilarityKind::Precomputed,
        }
    }

    /// Parameter map, useful for serialization and reporting.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self {
            SimilaritySpec::Sigmoid { a, r } => {
                m.insert("a".into(), *a);
                m.insert("r".into(), *r);
            }
            SimilaritySpec::Gaussian { sigma } => {
                m.insert("sigma".into(), *sigma);
            }
            _ => {}
        }
        m
    }

    /// Data-driven defaults: sigmoid gets `a = 1/p` (p = feature dimension)
    /// and `r = -1`; gaussian gets sigma equal to the mean pairwise euclidean
    /// distance over the training points (subsampled above
    /// [`SIGMA_SAMPLE_CAP`] points with a fixed seed). The other built-in
    /// kinds take no parameters.
    pub fn defaults(kind: SimilarityKind, data: &[Vec<f64>]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("cannot derive similarity parameters from an empty dataset".into()));
        }
        match kind {
            SimilarityKind::Sigmoid => {
                let p = data[0].len();
                if p == 0 {
                    return Err(Error::Data("sigmoid defaults need at least one feature".into()));
                }
                Ok(SimilaritySpec::Sigmoid { a: 1.0 / p as f64, r: -1.0 })
            }
            SimilarityKind::Gaussian => {
                let sigma = mean_pairwise_distance(data)?;
                SimilaritySpec::gaussian(sigma)
            }
            SimilarityKind::Manhattan => Ok(SimilaritySpec::Manhattan),
            SimilarityKind::Euclidean => Ok(SimilaritySpec::Euclidean),
            SimilarityKind::Linear => Ok(SimilaritySpec::Linear),
            SimilarityKind::Precomputed => {
                Err(Error::Config("precomputed similarity has no data-driven defaults; supply a matrix".into()))
            }
        }
    }

    /// Evaluates K(x, y). Errors on dimension mismatch and on non-finite results.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::dim_mismatch(x.len(), y.len()));
        }
        let v = match self {
            SimilaritySpec::Sigmoid { a, r } => (a * dot(x, y) + r).tanh(),
            SimilaritySpec::Manhattan => -x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum::<f64>(),
            SimilaritySpec::Gaussian { sigma } => {
                let d2 = sq_dist(x, y);
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            SimilaritySpec::Euclidean => -sq_dist(x, y),
            SimilaritySpec::Linear => dot(x, y),
            SimilaritySpec::Precomputed(m) => {
                let i = index_of(x)?;
                let j = index_of(y)?;
                m.get(i, j)?
            }
        };
        if !v.is_finite() {
            return Err(Error::Numeric(format!("similarity {} produced non-finite value {v}", self.kind())));
        }
        Ok(v)
    }

    /// Row of similarities of `x` against each landmark, in order.
    pub fn similarity_row(&self, x: &[f64], landmarks: &[Vec<f64>]) -> Result<Vec<f64>> {
        landmarks.iter().map(|l| self.evaluate(x, l)).collect()
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Interprets a point as a precomputed-matrix index. Split logic carries
/// these one-element carriers through, so train/test rows keep their identity.
fn index_of(x: &[f64]) -> Result<usize> {
    if x.len() != 1 {
        return Err(Error::Data(format!(
            "precomputed similarity expects single-element index carriers, got dimension {}",
            x.len()
        )));
    }
    let v = x[0];
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Data(format!("precomputed index must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Wraps a plain row index as the point representation used by precomputed
/// similarities.
pub fn index_point(i: usize) -> Vec<f64> {
    vec![i as f64]
}

/// Mean euclidean distance over all unordered pairs, subsampling the points
/// (uniform, without replacement, fixed seed) once the pairwise enumeration
/// would exceed the cap.
fn mean_pairwise_distance(data: &[Vec<f64>]) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::Data("gaussian sigma needs at least two points for a pairwise distance".into()));
    }
    let picked: Vec<&Vec<f64>> = if data.len() <= SIGMA_SAMPLE_CAP {
        data.iter().collect()
    } else {
        let mut rng = crate::data::rng(SIGMA_SAMPLE_SEED);
        let mut idx: Vec<usize> = (0..data.len()).collect();
        for i in 0..SIGMA_SAMPLE_CAP {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        idx[..SIGMA_SAMPLE_CAP].iter().map(|&i| &data[i]).collect()
    };
    let m = picked.len();
    let mut sum = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            if picked[i].len() != picked[j].len() {
                return Err(Error::dim_mismatch(picked[i].len(), picked[j].len()));
            }
            sum += sq_dist(picked[i], picked[j]).sqrt();
        }
    }
    let pairs = (m * (m - 1) / 2) as f64;
    let sigma = sum / pairs;
    if !(sigma > 0.0) {
        return Err(Error::Data("all training points coincide; gaussian sigma would be zero".into()));
    }
    Ok(sigma)
}
