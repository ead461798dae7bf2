//! Ordinal regression over the landmarked space.
//!
//! Labels {1..r} are separated by fixed equi-spaced thresholds; the objective
//! charges margin losses against the two thresholds bracketing each label.
//! The outermost thresholds are implicit at minus and plus infinity, so the
//! bottom and top labels are penalized from one side only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::gamma_margin;
use crate::optim::{self, SolverParams};
use crate::regression::{parse_linear_header, validate_training_inputs, LinearModel};

/// A linear score plus thresholds that discretize it into labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalModel {
    pub linear: LinearModel,
    /// Interior thresholds b_2..b_r, strictly increasing.
    pub thresholds: Vec<f64>,
    pub gamma: f64,
    pub num_labels: usize,
}

/// The fixed equi-spaced thresholds b_i = i - 1 for i in 2..=r, giving unit
/// spacing between consecutive thresholds.
pub fn fixed_thresholds(r: usize) -> Result<Vec<f64>> {
    if r < 2 {
        return Err(Error::Config(format!("ordinal regression needs at least 2 labels, got {r}")));
    }
    Ok((2..=r).map(|i| (i - 1) as f64).collect())
}

fn check_thresholds(thresholds: &[f64], r: usize) -> Result<()> {
    if thresholds.len() + 1 != r {
        return Err(Error::Config(format!("expected {} interior thresholds for {r} labels, got {}", r - 1, thresholds.len())));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Mean two-sided margin loss of the scores `<w, x_i>` against the
/// thresholds bracketing each label.
pub fn ordinal_objective(
    w: &[f64],
    x_embedded: &[Vec<f64>],
    labels: &[usize],
    thresholds: &[f64],
    gamma: f64,
) -> Result<f64> {
    let r = thresholds.len() + 1;
    if x_embedded.len() != labels.len() {
        return Err(Error::Data(format!("{} rows but {} labels", x_embedded.len(), labels.len())));
    }
    if x_embedded.is_empty() {
        return Err(Error::Data("empty sample".into()));
    }
    let mut total = 0.0;
    for (row, &label) in x_embedded.iter().zip(labels) {
        if label < 1 || label > r {
            return Err(Error::Data(format!("label {label} outside {{1..{r}}}")));
        }
        let score = optim::dot(w, row);
        total += sample_margin_loss(score, label, thresholds, gamma);
    }
    Ok(total / x_embedded.len() as f64)
}

fn sample_margin_loss(score: f64, label: usize, thresholds: &[f64], gamma: f64) -> f64 {
    let mut loss = 0.0;
    if label >= 2 {
        loss += gamma_margin(score - thresholds[label - 2], gamma);
    }
    if label <= thresholds.len() {
        loss += gamma_margin(thresholds[label - 1] - score, gamma);
    }
    loss
}

/// Fits the margin-threshold objective by projected subgradient descent over
/// the L2 ball of radius `norm_bound`, with thresholds fixed at b_i = i - 1.
pub fn fit_ordinal(
    x_embedded: &[Vec<f64>],
    labels: &[usize],
    r: usize,
    norm_bound: f64,
    gamma: f64,
    params: &SolverParams,
) -> Result<OrdinalModel> {
    let targets: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let d = validate_training_inputs(x_embedded, &targets)?;
    if !(norm_bound > 0.0) {
        return Err(Error::Config(format!("norm bound must be positive, got {norm_bound}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let thresholds = fixed_thresholds(r)?;
    if let Some(&bad) = labels.iter().find(|&&l| l < 1 || l > r) {
        return Err(Error::Data(format!("label {bad} outside {{1..{r}}}")));
    }

    let n = x_embedded.len() as f64;
    let gmax = optim::max_row_norm(x_embedded);
    let eval = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut obj = 0.0;
        let mut grad = vec![0.0; d];
        for (row, &label) in x_embedded.iter().zip(labels) {
            let score = optim::dot(w, row);
            obj += sample_margin_loss(score, label, thresholds.as_slice(), gamma);
            // margin subgradients, zero at the kink
            if label >= 2 && score - thresholds[label - 2] < gamma {
                for (g, v) in grad.iter_mut().zip(row) {
                    *g -= v;
                }
            }
            if label <= thresholds.len() && thresholds[label - 1] - score < gamma {
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += v;
                }
            }
        }
        for g in &mut grad {
            *g /= n;
        }
        (obj / n, grad)
    };

    // each sample can contribute two active margins
    let out = optim::minimize_over_l2_ball(d, norm_bound, params.max_iters, 2.0 * gmax, eval);
    Ok(OrdinalModel {
        linear: LinearModel {
            weights: out.weights,
            norm_bound,
            epsilon: 0.0,
            iterations: out.iterations,
            objective: out.objective,
        },
        thresholds,
        gamma,
        num_labels: r,
    })
}

impl OrdinalModel {
    /// Largest label whose threshold the score clears; the bottom label
    /// always qualifies.
    pub fn label_from_score(&self, score: f64) -> usize {
        1 + self.thresholds.iter().filter(|&&b| score >= b).count()
    }

    pub fn predict_label(&self, x_embedded: &[f64]) -> Result<usize> {
        Ok(self.label_from_score(self.linear.predict(x_embedded)?))
    }

    /// Serialization: the linear format followed by `r=`, `gamma=`, and one
    /// threshold per line.
    pub fn to_text(&self) -> String {
        let mut out = self.linear.to_text();
        out.push_str(&format!("r={}\n", self.num_labels));
        out.push_str(&format!("gamma={}\n", self.gamma));
        for b in &self.thresholds {
            out.push_str(&format!("{b}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Data("empty model file".into()))?;
        let (d, norm_bound, epsilon) = parse_linear_header(header)?;
        let mut weights = Vec::with_capacity(d);
        for _ in 0..d {
            let line = lines.next().ok_or_else(|| Error::Data("model file truncated in weights".into()))?;
            weights.push(
                line.trim().parse::<f64>().map_err(|_| Error::Data(format!("bad weight line {line:?}")))?,
            );
        }
        let r_line = lines.next().ok_or_else(|| Error::Data("missing r= line".into()))?;
        let r: usize = r_line
            .strip_prefix("r=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("bad r line {r_line:?}")))?;
        let g_line = lines.next().ok_or_else(|| Error::Data("missing gamma= line".into()))?;
        let gamma: f64 = g_line
            .strip_prefix("gamma=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Data(format!("bad gamma line {g_line:?}")))?;
        let mut thresholds = Vec::with_capacity(r.saturating_sub(1));
        for _ in 1..r {
            let line = lines.next().ok_or_else(|| Error::Data("model file truncated in thresholds".into()))?;
            thresholds.push(
                line.trim().parse::<f64>().map_err(|_| Error::Data(format!("bad threshold line {line:?}")))?,
            );
        }
        check_thresholds(&thresholds, r)?;
        Ok(OrdinalModel {
            linear: LinearModel { weights, norm_bound, epsilon, iterations: 0, objective: f64::NAN },
            thresholds,
            gamma,
            num_labels: r,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        OrdinalModel::from_text(&text)
    }
}

/// Mean absolute label error and zero-one mislabel rate.
pub fn ordinal_errors(preds: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    if preds.len() != labels.len() {
        return Err(Error::Data(format!("{} predictions but {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    let n = preds.len() as f64;
    let aae = preds.iter().zip(labels).map(|(&p, &l)| (p as f64 - l as f64).abs()).sum::<f64>() / n;
    let mislabel = preds.iter().zip(labels).filter(|(p, l)| p != l).count() as f64 / n;
    Ok((aae, mislabel))
}

/// Discretizes raw regression scores with the fixed thresholds, the naive
/// regression-then-threshold baseline.
pub fn threshold_scores(scores: &[f64], r: usize) -> Result<Vec<usize>> {
    let thresholds = fixed_thresholds(r)?;
    Ok(scores.iter().map(|&s| 1 + thresholds.iter().filter(|&&b| s >= b).count()).collect())
}
