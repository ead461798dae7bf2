//! Sparse regression by forward greedy selection over the L1 ball.
//!
//! Each step picks the coordinate with the largest gradient magnitude and
//! moves toward the corresponding signed vertex of the ball, so the iterate
//! after t steps has at most t nonzero coordinates. The fully corrective
//! variant refits all weights on the current support after every step.

use crate::error::{Error, Result};
use crate::loss::{smoothed_eps, smoothed_eps_grad};
use crate::optim;
use crate::regression::{validate_training_inputs, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgsVariant {
    Plain,
    FullyCorrective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgsSurrogate {
    /// Smoothed epsilon-insensitive loss; pair with `beta = 1/epsilon_2`.
    SmoothedEps,
    /// Squared loss; its gradient has Lipschitz constant 2, so `beta = 2`.
    Squared,
}

/// Configuration of the greedy sparse fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FgsConfig {
    /// Radius of the L1 ball the weights live in.
    pub radius: f64,
    /// Stop once the duality gap drops to this tolerance.
    pub tolerance: f64,
    /// Smoothness constant used in the step-size rule.
    pub beta: f64,
    /// Insensitivity width of the smoothed surrogate.
    pub insensitivity: f64,
    /// Iteration cap; defaults to ceil(8 radius^2 / tolerance^2).
    pub max_sparsity: Option<usize>,
    pub variant: FgsVariant,
    pub surrogate: FgsSurrogate,
}

impl FgsConfig {
    pub fn smoothed(radius: f64, tolerance: f64, insensitivity: f64, beta: f64) -> Self {
        FgsConfig {
            radius,
            tolerance,
            beta,
            insensitivity,
            max_sparsity: None,
            variant: FgsVariant::Plain,
            surrogate: FgsSurrogate::SmoothedEps,
        }
    }

    /// Squared-loss surrogate with the fully corrective refit, the
    /// combination used by the sparse benchmark method.
    pub fn squared_fully_corrective(radius: f64, tolerance: f64) -> Self {
        FgsConfig {
            radius,
            tolerance,
            beta: 2.0,
            insensitivity: 0.0,
            max_sparsity: None,
            variant: FgsVariant::FullyCorrective,
            surrogate: FgsSurrogate::Squared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Config(format!("L1 radius must be positive, got {}", self.radius)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("stopping tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.insensitivity < 0.0 {
            return Err(Error::Config(format!("insensitivity must be non-negative, got {}", self.insensitivity)));
        }
        if self.max_sparsity == Some(0) {
            return Err(Error::Config("max sparsity must be at least 1".into()));
        }
        Ok(())
    }

    /// Iteration cap: the override when given, otherwise
    /// ceil(8 radius^2 / tolerance^2).
    pub fn sparsity_cap(&self) -> usize {
        self.max_sparsity
            .unwrap_or_else(|| (8.0 * self.radius * self.radius / (self.tolerance * self.tolerance)).ceil() as usize)
    }
}

/// One greedy step: chosen coordinate, duality gap, step size, objective
/// after the step, and the iterate's norms.
#[derive(Debug, Clone)]
pub struct FgsIteration {
    pub t: usize,
    pub coordinate: usize,
    pub gap: f64,
    pub step: f64,
    pub objective: f64,
    pub l1_norm: f64,
    pub support_size: usize,
}

/// Per-iteration record of a greedy fit.
#[derive(Debug, Clone, Default)]
pub struct FgsTrace {
    pub iterations: Vec<FgsIteration>,
}

impl FgsTrace {
    /// CSV export: `t,r_t,delta_t,eta_t,objective` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,r_t,delta_t,eta_t,objective\n");
        for it in &self.iterations {
            out.push_str(&format!("{},{},{},{},{}\n", it.t, it.coordinate, it.gap, it.step, it.objective));
        }
        out
    }
}

/// Number of effectively nonzero coordinates.
pub fn sparsity(model: &LinearModel) -> usize {
    model.weights.iter().filter(|w| w.abs() > 1e-12).count()
}

fn surrogate_value(cfg: &FgsConfig, pred: f64, target: f64) -> f64 {
    match cfg.surrogate {
        FgsSurrogate::SmoothedEps => smoothed_eps(pred, target, cfg.insensitivity, cfg.beta),
        FgsSurrogate::Squared => (pred - target) * (pred - target),
    }
}

fn surrogate_grad(cfg: &FgsConfig, pred: f64, target: f64) -> f64 {
    match cfg.surrogate {
        FgsSurrogate::SmoothedEps => smoothed_eps_grad(pred, target, cfg.insensitivity, cfg.beta),
        FgsSurrogate::Squared => 2.0 * (pred - target),
    }
}

fn empirical_objective(cfg: &FgsConfig, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    let n = x.len() as f64;
    x.iter().zip(y).map(|(row, &t)| surrogate_value(cfg, optim::dot(w, row), t)).sum::<f64>() / n
}

fn empirical_gradient(cfg: &FgsConfig, x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let n = x.len() as f64;
    let d = w.len();
    let mut grad = vec![0.0; d];
    for (row, &t) in x.iter().zip(y) {
        let g = surrogate_grad(cfg, optim::dot(w, row), t);
        for (acc, v) in grad.iter_mut().zip(row) {
            *acc += g * v;
        }
    }
    for g in &mut grad {
        *g /= n;
        if !g.is_finite() {
            return Err(Error::Numeric("non-finite risk gradient".into()));
        }
    }
    Ok(grad)
}

/// Forward greedy selection over the unscaled landmarked space.
///
/// Runs for at most `sparsity_cap` steps and stops early once the duality gap
/// `<grad, w> + radius * ||grad||_inf` falls to the tolerance, returning the
/// pre-update iterate. Ties in the coordinate choice break toward the lowest
/// index. Coordinates are never removed from the support.
pub fn fit_fgs(x_embedded: &[Vec<f64>], y: &[f64], cfg: &FgsConfig) -> Result<(LinearModel, FgsTrace)> {
    let d = validate_training_inputs(x_embedded, y)?;
    cfg.validate()?;
    let cap = cfg.sparsity_cap();

    let mut w = vec![0.0; d];
    let mut support: Vec<usize> = Vec::new();
    let mut trace = FgsTrace::default();
    let mut updates = 0usize;

    for t in 1..=cap {
        let grad = empirical_gradient(cfg, x_embedded, y, &w)?;
        let (coord, max_mag) = grad
            .iter()
            .enumerate()
            .map(|(j, g)| (j, g.abs()))
            .fold((0usize, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let gap = optim::dot(&grad, &w) + cfg.radius * max_mag;

        if gap <= cfg.tolerance {
            trace.iterations.push(FgsIteration {
                t,
                coordinate: coord,
                gap,
                step: 0.0,
                objective: empirical_objective(cfg, x_embedded, y, &w),
                l1_norm: optim::l1_norm(&w),
                support_size: support.len(),
            });
            break;
        }

        let step = (gap / (4.0 * cfg.radius * cfg.radius * cfg.beta)).min(1.0);
        let vertex = -grad[coord].signum() * cfg.radius;
        for v in w.iter_mut() {
            *v *= 1.0 - step;
        }
        w[coord] += step * vertex;
        if !support.contains(&coord) {
            support.push(coord);
        }
        updates += 1;

        if cfg.variant == FgsVariant::FullyCorrective {
            correct_on_support(cfg, x_embedded, y, &support, &mut w)?;
        }

        trace.iterations.push(FgsIteration {
            t,
            coordinate: coord,
            gap,
            step,
            objective: empirical_objective(cfg, x_embedded, y, &w),
            l1_norm: optim::l1_norm(&w),
            support_size: support.len(),
        });
    }

    let objective = empirical_objective(cfg, x_embedded, y, &w);
    let model = LinearModel {
        weights: w,
        norm_bound: cfg.radius,
        epsilon: cfg.insensitivity,
        iterations: updates,
        objective,
    };
    Ok((model, trace))
}

/// Refit restricted to the support: exact least squares for the squared
/// surrogate (rescaled into the ball if the solution leaves it), projected
/// gradient steps for the smoothed surrogate.
fn correct_on_support(cfg: &FgsConfig, x: &[Vec<f64>], y: &[f64], support: &[usize], w: &mut [f64]) -> Result<()> {
    match cfg.surrogate {
        FgsSurrogate::Squared => {
            let columns: Vec<Vec<f64>> =
                support.iter().map(|&j| x.iter().map(|row| row[j]).collect()).collect();
            let solved = optim::least_squares(&columns, y)?;
            let l1: f64 = solved.iter().map(|v| v.abs()).sum();
            let shrink = if l1 > cfg.radius { cfg.radius / l1 } else { 1.0 };
            for v in w.iter_mut() {
                *v = 0.0;
            }
            for (&j, &v) in support.iter().zip(&solved) {
                w[j] = v * shrink;
            }
        }
        FgsSurrogate::SmoothedEps => {
            let n = x.len() as f64;
            let mut ws: Vec<f64> = support.iter().map(|&j| w[j]).collect();
            let step = 1.0 / cfg.beta.max(1.0);
            for _ in 0..200 {
                let mut grad = vec![0.0; support.len()];
                for (row, &t) in x.iter().zip(y) {
                    let pred: f64 = support.iter().zip(&ws).map(|(&j, v)| v * row[j]).sum();
                    let g = surrogate_grad(cfg, pred, t);
                    for (acc, &j) in grad.iter_mut().zip(support) {
                        *acc += g * row[j] / n;
                    }
                }
                for (v, g) in ws.iter_mut().zip(&grad) {
                    *v -= step * g;
                }
                optim::project_l1(&mut ws, cfg.radius);
            }
            for v in w.iter_mut() {
                *v = 0.0;
            }
            for (&j, &v) in support.iter().zip(&ws) {
                w[j] = v;
            }
        }
    }
    Ok(())
}
