//! Dense regression in the landmarked space: empirical epsilon-insensitive
//! risk minimized over the L2 ball of radius B by projected subgradient
//! descent.

use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::eps_insensitive;
use crate::optim::{self, SolverParams};

/// A linear predictor over the landmarked space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    /// L2 (or, for the sparse fit, L1) ball radius the weights respect.
    pub norm_bound: f64,
    /// Insensitivity width the model was trained with.
    pub epsilon: f64,
    /// Iterations the solver ran.
    pub iterations: usize,
    /// Final training objective.
    pub objective: f64,
}

impl LinearModel {
    /// Inner product with an embedded point.
    pub fn predict(&self, x_embedded: &[f64]) -> Result<f64> {
        if x_embedded.len() != self.weights.len() {
            return Err(Error::dim_mismatch(self.weights.len(), x_embedded.len()));
        }
        Ok(optim::dot(&self.weights, x_embedded))
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Flat text serialization: a one-line header followed by one full
    /// precision weight per line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "simland-linear v1 d={} B={} eps={}\n",
            self.weights.len(),
            self.norm_bound,
            self.epsilon
        );
        for w in &self.weights {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Data("empty model file".into()))?;
        let (d, norm_bound, epsilon) = parse_linear_header(header)?;
        let mut weights = Vec::with_capacity(d);
        for line in lines.by_ref().take(d) {
            weights.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad weight line {line:?} in model file")))?,
            );
        }
        if weights.len() != d {
            return Err(Error::Data(format!("model file has {} weights, header says {d}", weights.len())));
        }
        Ok(LinearModel { weights, norm_bound, epsilon, iterations: 0, objective: f64::NAN })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        LinearModel::from_text(&text)
    }
}

pub(crate) fn parse_linear_header(header: &str) -> Result<(usize, f64, f64)> {
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "simland-linear" || toks[1] != "v1" {
        return Err(Error::Data(format!("unrecognized model header {header:?}")));
    }
    let field = |tok: &str, key: &str| -> Result<f64> {
        tok.strip_prefix(key)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Data(format!("bad header field {tok:?}")))
    };
    let d = field(toks[2], "d=")? as usize;
    let b = field(toks[3], "B=")?;
    let eps = field(toks[4], "eps=")?;
    Ok((d, b, eps))
}

pub(crate) fn validate_training_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} rows but {} targets", x.len(), y.len())));
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::dim_mismatch(d, row.len()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature in row {i}")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite target".into()));
    }
    Ok(d)
}

/// Fits the constrained empirical risk minimizer
/// `argmin_{||w||_2 <= B} (1/n) sum_i eps_insensitive(<w, x_i>, y_i)`.
///
/// The returned weights are the better of the averaged and the best iterate,
/// so the objective never exceeds that of the zero predictor. Deterministic:
/// the solver draws no randomness.
pub fn fit_dense(
    x_embedded: &[Vec<f64>],
    y: &[f64],
    norm_bound: f64,
    epsilon: f64,
    params: &SolverParams,
) -> Result<LinearModel> {
    let d = validate_training_inputs(x_embedded, y)?;
    if !(norm_bound > 0.0) {
        return Err(Error::Config(format!("norm bound must be positive, got {norm_bound}")));
    }
    if epsilon < 0.0 {
        return Err(Error::Config(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let n = x_embedded.len() as f64;
    let gmax = optim::max_row_norm(x_embedded);

    let eval = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut obj = 0.0;
        let mut grad = vec![0.0; d];
        for (row, &target) in x_embedded.iter().zip(y) {
            let pred = optim::dot(w, row);
            obj += eps_insensitive(pred, target, epsilon);
            let resid = pred - target;
            // subgradient 0 inside the tube and at its boundary
            if resid.abs() > epsilon {
                let s = resid.signum();
                for (g, v) in grad.iter_mut().zip(row) {
                    *g += s * v;
                }
            }
        }
        for g in &mut grad {
            *g /= n;
        }
        (obj / n, grad)
    };

    let out = optim::minimize_over_l2_ball(d, norm_bound, params.max_iters, gmax, eval);
    Ok(LinearModel {
        weights: out.weights,
        norm_bound,
        epsilon,
        iterations: out.iterations,
        objective: out.objective,
    })
}

/// Candidate norm bounds for [`fit_dense_grid`].
pub const NORM_BOUND_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

/// Fits one model per candidate norm bound, rates each on a 20% validation
/// carve-out by mean absolute error, and refits the winner on all rows.
/// Returns the refit model and the chosen bound.
pub fn fit_dense_grid(
    x_embedded: &[Vec<f64>],
    y: &[f64],
    grid: &[f64],
    epsilon: f64,
    params: &SolverParams,
) -> Result<(LinearModel, f64)> {
    validate_training_inputs(x_embedded, y)?;
    if grid.is_empty() {
        return Err(Error::Config("empty norm-bound grid".into()));
    }
    let n = x_embedded.len();
    let n_val = ((n as f64) * 0.2).ceil() as usize;
    if n_val == 0 || n_val >= n {
        // too few rows to carve out validation; fall back to the first bound
        let model = fit_dense(x_embedded, y, grid[0], epsilon, params)?;
        return Ok((model, grid[0]));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = crate::data::subrng(params.seed, "b-grid", 0);
    use rand::Rng;
    for i in 0..n {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let (val_idx, fit_idx) = idx.split_at(n_val);
    let fit_x: Vec<Vec<f64>> = fit_idx.iter().map(|&i| x_embedded[i].clone()).collect();
    let fit_y: Vec<f64> = fit_idx.iter().map(|&i| y[i]).collect();

    let mut best: Option<(f64, f64)> = None; // (validation mae, bound)
    for &b in grid {
        let model = fit_dense(&fit_x, &fit_y, b, epsilon, params)?;
        let mut mae = 0.0;
        for &i in val_idx {
            mae += (model.predict(&x_embedded[i])? - y[i]).abs();
        }
        mae /= val_idx.len() as f64;
        if best.is_none_or(|(m, _)| mae < m) {
            best = Some((mae, b));
        }
    }
    let chosen = best.expect("non-empty grid").1;
    let model = fit_dense(x_embedded, y, chosen, epsilon, params)?;
    Ok((model, chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn predict_is_inner_product() {
        let m = LinearModel { weights: vec![1.0, 2.0], norm_bound: 10.0, epsilon: 0.0, iterations: 0, objective: 0.0 };
        assert_eq!(m.predict(&[3.0, 4.0]).unwrap(), 11.0);
        assert!(m.predict(&[1.0]).is_err());

        let zero = LinearModel { weights: vec![0.0; 3], norm_bound: 1.0, epsilon: 0.0, iterations: 0, objective: 0.0 };
        assert_eq!(zero.predict(&[5.0, -2.0, 7.0]).unwrap(), 0.0);

        let mut r = crate::data::rng(3);
        for _ in 0..50 {
            let w: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
            let manual: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            let m = LinearModel { weights: w, norm_bound: 10.0, epsilon: 0.0, iterations: 0, objective: 0.0 };
            assert_eq!(m.predict(&x).unwrap(), manual);
        }
    }

    #[test]
    fn one_dimensional_analytic_optimum() {
        // single point (x, y) = (1, 0.5): objective |w - 0.5| has optimum 0.5
        let m = fit_dense(&[vec![1.0]], &[0.5], 1.0, 0.0, &SolverParams { max_iters: 400_000, seed: 0 }).unwrap();
        assert!((m.weights[0] - 0.5).abs() < 1e-3, "w = {}", m.weights[0]);
        assert!(m.objective < 1e-3);
    }

    #[test]
    fn zero_targets_stay_at_zero() {
        let x = vec![vec![1.0, -1.0], vec![0.5, 2.0]];
        let m = fit_dense(&x, &[0.0, 0.0], 5.0, 0.0, &SolverParams::default()).unwrap();
        assert_eq!(m.objective, 0.0);
    }

    #[test]
    fn degenerate_ball_pins_weights_near_zero() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![1.0, 2.0];
        let m = fit_dense(&x, &y, 1e-9, 0.0, &SolverParams::default()).unwrap();
        assert!(m.weights[0].abs() <= 1e-9);
        let zero_obj = (1.0 + 2.0) / 2.0;
        assert!((m.objective - zero_obj).abs() < 1e-6);
    }

    #[test]
    fn norm_feasibility_and_determinism() {
        let mut r = crate::data::rng(8);
        let x: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..30).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b = 0.3;
        let m1 = fit_dense(&x, &y, b, 0.01, &SolverParams::default()).unwrap();
        let m2 = fit_dense(&x, &y, b, 0.01, &SolverParams::default()).unwrap();
        assert_eq!(m1.weights, m2.weights);
        let norm = m1.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= b + 1e-9);
    }

    #[test]
    fn exact_linear_target_is_recovered() {
        let mut r = crate::data::rng(21);
        let w_true = [0.5, -0.25];
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..2).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|row| w_true[0] * row[0] + w_true[1] * row[1]).collect();
        let m = fit_dense(&x, &y, 2.0, 0.0, &SolverParams { max_iters: 5000, seed: 0 }).unwrap();
        let mae: f64 =
            x.iter().zip(&y).map(|(row, &t)| (m.predict(row).unwrap() - t).abs()).sum::<f64>() / y.len() as f64;
        assert!(mae <= 1e-2, "mae = {mae}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_dense(&[], &[], 1.0, 0.0, &SolverParams::default()).is_err());
        assert!(fit_dense(&[vec![f64::NAN]], &[0.0], 1.0, 0.0, &SolverParams::default()).is_err());
        assert!(fit_dense(&[vec![1.0]], &[f64::INFINITY], 1.0, 0.0, &SolverParams::default()).is_err());
        assert!(fit_dense(&[vec![1.0]], &[1.0], 0.0, 0.0, &SolverParams::default()).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = LinearModel {
            weights: vec![0.1, -2.5e-17, 3.0],
            norm_bound: 10.0,
            epsilon: 0.01,
            iterations: 2000,
            objective: 0.002,
        };
        let text = m.to_text();
        assert!(text.starts_with("simland-linear v1 d=3 B=10 eps=0.01\n"));
        let back = LinearModel::from_text(&text).unwrap();
        assert_eq!(back.weights, m.weights);
        assert_eq!(back.norm_bound, m.norm_bound);
        assert_eq!(back.epsilon, m.epsilon);
        assert!(LinearModel::from_text("nonsense v9\n1\n").is_err());
    }

    #[test]
    fn grid_search_picks_a_workable_bound() {
        let mut r = crate::data::rng(77);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![r.gen_range(-1.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|row| 3.0 * row[0]).collect();
        let (model, chosen) =
            fit_dense_grid(&x, &y, &NORM_BOUND_GRID, 0.0, &SolverParams { max_iters: 4000, seed: 5 }).unwrap();
        // the 0.1 ball cannot reach slope 3; grid search must move past it
        assert!(chosen >= 1.0, "chose {chosen}");
        assert!((model.predict(&[1.0]).unwrap() - 3.0).abs() < 0.5);
    }
}
