//! Ranking with the NDCG loss and its squared surrogate.
//!
//! A ranking instance is one query with m joint query-document vectors and
//! their relevances. Training flattens all pairs into a single regression on
//! normalized gain targets; evaluation scores whole instances with the NDCG
//! loss, which is -1 exactly at a perfect ordering.

use rand::Rng;

use crate::embedding::Embedder;
use crate::error::{Error, Result};
use crate::optim::{self, SolverParams};
use crate::regression::LinearModel;

/// One query with its documents and relevance scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingInstance {
    pub query: String,
    /// Joint query-document feature vectors.
    pub documents: Vec<Vec<f64>>,
    pub relevance: Vec<f64>,
}

impl RankingInstance {
    pub fn new(query: impl Into<String>, documents: Vec<Vec<f64>>, relevance: Vec<f64>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Data("ranking instance has no documents".into()));
        }
        if documents.len() != relevance.len() {
            return Err(Error::Data(format!(
                "{} documents but {} relevance scores",
                documents.len(),
                relevance.len()
            )));
        }
        if relevance.iter().any(|r| !r.is_finite()) {
            return Err(Error::Data("non-finite relevance score".into()));
        }
        Ok(RankingInstance { query: query.into(), documents, relevance })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Rescales relevances so the global maximum is at most 1, as the gain
/// formulation assumes. No-op when already within range. Returns the divisor.
pub fn normalize_relevance(instances: &mut [RankingInstance]) -> f64 {
    let max = instances
        .iter()
        .flat_map(|i| i.relevance.iter().cloned())
        .fold(f64::NEG_INFINITY, f64::max);
    if max > 1.0 {
        for inst in instances.iter_mut() {
            for r in &mut inst.relevance {
                *r /= max;
            }
        }
        max
    } else {
        1.0
    }
}

/// Exponential gain 2^rel - 1.
#[inline]
pub fn gain(rel: f64) -> f64 {
    rel.exp2() - 1.0
}

/// Logarithmic position decay ln(1 + t) for 1-based position t.
#[inline]
pub fn decay(position: usize) -> f64 {
    debug_assert!(position >= 1);
    (1.0 + position as f64).ln()
}

/// Maximum over permutations of the decay-weighted sum, attained by pairing
/// values in descending order with positions 1, 2, ...
pub fn d_norm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Data("d-norm of an empty vector".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted.iter().enumerate().map(|(i, v)| v / decay(i + 1)).sum())
}

/// Per-document targets: element-wise gain over the d-norm of the gains.
/// Errors when no document has positive gain.
pub fn eta_targets(relevance: &[f64]) -> Result<Vec<f64>> {
    let gains: Vec<f64> = relevance.iter().map(|&r| gain(r)).collect();
    let dn = d_norm(&gains)?;
    if dn <= 0.0 {
        return Err(Error::Data("ranking instance has no positive gain; targets undefined".into()));
    }
    Ok(gains.iter().map(|g| g / dn).collect())
}

/// Positions (1-based) each index receives when sorting scores descending,
/// ties broken by original index.
fn positions_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut pos = vec![0; scores.len()];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p + 1;
    }
    pos
}

/// NDCG loss of scores against relevances: -1 at a perfect ranking, at most 0.
/// Depends on the scores only through their induced ordering.
pub fn ndcg_loss(scores: &[f64], relevance: &[f64]) -> Result<f64> {
    if scores.len() != relevance.len() {
        return Err(Error::dim_mismatch(relevance.len(), scores.len()));
    }
    let gains: Vec<f64> = relevance.iter().map(|&r| gain(r)).collect();
    let dn = d_norm(&gains)?;
    if dn <= 0.0 {
        return Err(Error::Data("zero total gain; loss undefined".into()));
    }
    let pos = positions_by_score(scores);
    let sum: f64 = gains.iter().zip(&pos).map(|(g, &p)| g / decay(p)).sum();
    Ok(-sum / dn)
}

/// A fitted ranker plus the count of instances skipped for lacking gain.
#[derive(Debug, Clone)]
pub struct RankerFit {
    pub model: LinearModel,
    pub skipped_instances: usize,
}

/// Flattens query-document pairs into one squared-loss regression on the
/// eta targets and fits it over the L2 ball of radius `norm_bound`.
pub fn fit_ranker(
    instances: &[RankingInstance],
    embedder: &Embedder,
    norm_bound: f64,
    params: &SolverParams,
) -> Result<RankerFit> {
    if instances.is_empty() {
        return Err(Error::Data("no ranking instances".into()));
    }
    if !(norm_bound > 0.0) {
        return Err(Error::Config(format!("norm bound must be positive, got {norm_bound}")));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut skipped = 0usize;
    for inst in instances {
        match eta_targets(&inst.relevance) {
            Ok(eta) => {
                for (doc, t) in inst.documents.iter().zip(eta) {
                    rows.push(embedder.embed(doc)?);
                    targets.push(t);
                }
            }
            Err(_) => skipped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::Data("every ranking instance lacked positive gain".into()));
    }

    let d = rows[0].len();
    let n = rows.len() as f64;
    let gmax = optim::max_row_norm(&rows);
    let tmax = targets.iter().cloned().fold(0.0, f64::max);
    let eval = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut obj = 0.0;
        let mut grad = vec![0.0; d];
        for (row, &t) in rows.iter().zip(&targets) {
            let resid = optim::dot(w, row) - t;
            obj += resid * resid;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += 2.0 * resid * v;
            }
        }
        for g in &mut grad {
            *g /= n;
        }
        (obj / n, grad)
    };
    let grad_bound = 2.0 * (norm_bound * gmax + tmax) * gmax;
    let out = optim::minimize_over_l2_ball(d, norm_bound, params.max_iters, grad_bound, eval);
    Ok(RankerFit {
        model: LinearModel {
            weights: out.weights,
            norm_bound,
            epsilon: 0.0,
            iterations: out.iterations,
            objective: out.objective,
        },
        skipped_instances: skipped,
    })
}

/// Mean NDCG loss of the model across instances; instances without positive
/// gain are skipped, mirroring the fit.
pub fn eval_ranking(model: &LinearModel, instances: &[RankingInstance], embedder: &Embedder) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for inst in instances {
        let gains: Vec<f64> = inst.relevance.iter().map(|&r| gain(r)).collect();
        if d_norm(&gains)? <= 0.0 {
            continue;
        }
        let scores: Vec<f64> =
            inst.documents.iter().map(|doc| model.predict(&embedder.embed(doc)?)).collect::<Result<_>>()?;
        total += ndcg_loss(&scores, &inst.relevance)?;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Data("no ranking instances with positive gain to evaluate".into()));
    }
    Ok(total / counted as f64)
}

/// Random split of instances into train/test by whole queries; the test side
/// gets ceil(fraction * #instances) queries. Deterministic per seed.
pub fn split_instances(
    instances: &[RankingInstance],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<RankingInstance>, Vec<RankingInstance>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let n = instances.len();
    let n_test = (test_fraction * n as f64).ceil() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Data(format!("test fraction {test_fraction} leaves an empty side for {n} queries")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = crate::data::rng(seed);
    for i in 0..n {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut test_idx: Vec<usize> = idx[..n_test].to_vec();
    let mut train_idx: Vec<usize> = idx[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        train_idx.into_iter().map(|i| instances[i].clone()).collect(),
        test_idx.into_iter().map(|i| instances[i].clone()).collect(),
    ))
}
