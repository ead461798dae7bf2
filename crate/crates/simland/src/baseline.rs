//! Kernel regression baseline: the similarity-weighted mean of training
//! targets, with rounding to a discrete label for ordinal tasks.

use crate::error::{Error, Result};
use crate::similarity::SimilaritySpec;

const DENOMINATOR_FLOOR: f64 = 1e-9;

/// Nadaraya-Watson style predictor over raw (unembedded) points.
#[derive(Debug, Clone)]
pub struct KrModel {
    train_features: Vec<Vec<f64>>,
    train_targets: Vec<f64>,
    spec: SimilaritySpec,
    /// When set to the label count r, predictions are rounded and clamped
    /// into {1..r}.
    ordinal_labels: Option<usize>,
    target_mean: f64,
}

impl KrModel {
    pub fn new(
        train_features: Vec<Vec<f64>>,
        train_targets: Vec<f64>,
        spec: SimilaritySpec,
        ordinal_labels: Option<usize>,
    ) -> Result<Self> {
        if train_features.is_empty() || train_features.len() != train_targets.len() {
            return Err(Error::Data(format!(
                "kernel regression needs equal, non-empty features ({}) and targets ({})",
                train_features.len(),
                train_targets.len()
            )));
        }
        if ordinal_labels == Some(0) || ordinal_labels == Some(1) {
            return Err(Error::Config("ordinal label count must be at least 2".into()));
        }
        let target_mean = train_targets.iter().sum::<f64>() / train_targets.len() as f64;
        Ok(KrModel { train_features, train_targets, spec, ordinal_labels, target_mean })
    }

    /// Similarity-weighted mean of the training targets. Falls back to the
    /// plain training mean when the weights cancel to nearly zero, which
    /// indefinite similarities can produce. Ordinal models round to the
    /// nearest label and clamp into range.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, yi) in self.train_features.iter().zip(&self.train_targets) {
            let k = self.spec.evaluate(x, xi)?;
            num += yi * k;
            den += k;
        }
        let raw = if den.abs() < DENOMINATOR_FLOOR { self.target_mean } else { num / den };
        Ok(match self.ordinal_labels {
            None => raw,
            Some(r) => raw.round().clamp(1.0, r as f64),
        })
    }

    /// Ordinal prediction as a label.
    pub fn predict_label(&self, x: &[f64]) -> Result<usize> {
        match self.ordinal_labels {
            Some(_) => Ok(self.predict(x)? as usize),
            None => Err(Error::Config("model was not fitted for an ordinal task".into())),
        }
    }
}
