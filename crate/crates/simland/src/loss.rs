//! Loss functions and their (sub)gradients.
//!
//! The regression path works with the epsilon-insensitive loss and its smoothed
//! surrogate, ordinal regression uses the margin loss, and ranking uses squared
//! loss. All functions here are pure and safe to call from any thread.

use crate::error::{Error, Result};

/// Validated bundle of loss hyperparameters.
///
/// Defaults: `epsilon = 0.01` on unit-scaled targets, `beta = 1/epsilon = 100`,
/// `gamma = 0.25`, `delta_spacing = 1`. These are library choices; override per run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    /// Insensitivity half-width of the regression tube.
    pub epsilon: f64,
    /// Smoothing constant of the surrogate (Lipschitz constant of its gradient).
    pub beta: f64,
    /// Margin enforced on each side of an ordinal label's slab.
    pub gamma: f64,
    /// Minimum spacing between consecutive ordinal thresholds.
    pub delta_spacing: f64,
}

impl LossParams {
    pub fn new(epsilon: f64, beta: f64, gamma: f64, delta_spacing: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {beta}")));
        }
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be > 0, got {gamma}")));
        }
        if !(delta_spacing > 0.0) {
            return Err(Error::Config(format!("delta spacing must be > 0, got {delta_spacing}")));
        }
        Ok(LossParams { epsilon, beta, gamma, delta_spacing })
    }
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams { epsilon: 0.01, beta: 100.0, gamma: 0.25, delta_spacing: 1.0 }
    }
}

/// Epsilon-insensitive loss: zero inside a tube of half-width `epsilon`, linear outside.
#[inline]
pub fn eps_insensitive(a: f64, b: f64, epsilon: f64) -> f64 {
    debug_assert!(epsilon >= 0.0);
    let u = (a - b).abs();
    if u < epsilon {
        0.0
    } else {
        u - epsilon
    }
}

/// Smoothed epsilon-insensitive surrogate.
///
/// Piecewise: zero inside the tube, quadratic of curvature `beta` in a band of
/// width `1/beta`, then linear. Continuously differentiable in `a`, and never
/// more than `1/(2 beta)` below [`eps_insensitive`].
#[inline]
pub fn smoothed_eps(a: f64, b: f64, epsilon: f64, beta: f64) -> f64 {
    debug_assert!(epsilon >= 0.0 && beta > 0.0);
    let u = (a - b).abs();
    if u <= epsilon {
        0.0
    } else if u < epsilon + 1.0 / beta {
        0.5 * beta * (u - epsilon) * (u - epsilon)
    } else {
        u - epsilon - 0.5 / beta
    }
}

/// Derivative of [`smoothed_eps`] in its first argument.
#[inline]
pub fn smoothed_eps_grad(a: f64, b: f64, epsilon: f64, beta: f64) -> f64 {
    debug_assert!(epsilon >= 0.0 && beta > 0.0);
    let diff = a - b;
    let u = diff.abs();
    if u <= epsilon {
        0.0
    } else if u < epsilon + 1.0 / beta {
        beta * (u - epsilon) * diff.signum()
    } else {
        diff.signum()
    }
}

/// Margin loss: `max(gamma - x, 0)`.
#[inline]
pub fn gamma_margin(x: f64, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    (gamma - x).max(0.0)
}

/// Absolute error `|a - b|`.
#[inline]
pub fn absolute(a: f64, b: f64) -> f64 {
    (a - b).abs()
}

/// Squared error `(a - b)^2`.
#[inline]
pub fn squared(a: f64, b: f64) -> f64 {
    (a - b) * (a - b)
}

/// Squared L2 distance between two equal-length vectors.
pub fn squared_vec(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim_mismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Bound-transfer function `(x + delta - 1) / delta`.
///
/// Converts a margin-loss bound into an ordinal-error bound for
/// delta-spaced thresholds; identity at `delta = 1`. Diagnostic only.
#[inline]
pub fn psi_delta(x: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    (x + delta - 1.0) / delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        crate::data::rng(13_370)
    }

    #[test]
    fn eps_insensitive_examples() {
        assert_eq!(eps_insensitive(1.0, 1.05, 0.1), 0.0);
        assert!((eps_insensitive(1.0, 0.5, 0.1) - 0.4).abs() < 1e-15);
        // zero width degenerates to absolute error
        let mut r = rng();
        for _ in 0..100 {
            let a = r.gen_range(-5.0..5.0);
            let b = r.gen_range(-5.0..5.0);
            assert_eq!(eps_insensitive(a, b, 0.0), (a - b).abs());
        }
    }

    #[test]
    fn smoothed_eps_piecewise_examples() {
        // boundary of the flat region
        assert_eq!(smoothed_eps(0.1, 0.0, 0.1, 2.0), 0.0);
        // quadratic piece: (beta/2) * (u - eps)^2
        assert!((smoothed_eps(0.3, 0.0, 0.1, 2.0) - 0.04).abs() < 1e-15);
        // linear piece: u - eps - 1/(2 beta)
        assert!((smoothed_eps(1.0, 0.0, 0.1, 2.0) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn smoothed_eps_grad_examples() {
        assert_eq!(smoothed_eps_grad(0.05, 0.0, 0.1, 2.0), 0.0);
        assert!((smoothed_eps_grad(0.3, 0.0, 0.1, 2.0) - 0.4).abs() < 1e-15);
        assert_eq!(smoothed_eps_grad(5.0, 0.0, 0.1, 2.0), 1.0);
        assert_eq!(smoothed_eps_grad(-5.0, 0.0, 0.1, 2.0), -1.0);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut r = rng();
        let h = 1e-6;
        let mut checked = 0;
        while checked < 1000 {
            let a: f64 = r.gen_range(-3.0..3.0);
            let b: f64 = r.gen_range(-3.0..3.0);
            let eps: f64 = r.gen_range(0.0..0.5);
            let beta: f64 = r.gen_range(0.5..50.0);
            let u = (a - b).abs();
            // central differences straddle the curvature jumps; skip a small window
            if (u - eps).abs() < 1e-3 || (u - (eps + 1.0 / beta)).abs() < 1e-3 {
                continue;
            }
            let fd = (smoothed_eps(a + h, b, eps, beta) - smoothed_eps(a - h, b, eps, beta)) / (2.0 * h);
            let g = smoothed_eps_grad(a, b, eps, beta);
            assert!(
                (g - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "grad {g} vs fd {fd} at a={a} b={b} eps={eps} beta={beta}"
            );
            checked += 1;
        }
    }

    #[test]
    fn sandwich_inequality() {
        let mut r = rng();
        for _ in 0..100_000 {
            let a: f64 = r.gen_range(-4.0..4.0);
            let b: f64 = r.gen_range(-4.0..4.0);
            let eps: f64 = r.gen_range(0.0..1.0);
            let beta: f64 = r.gen_range(0.1..100.0);
            let gap = eps_insensitive(a, b, eps) - smoothed_eps(a, b, eps, beta);
            assert!(gap >= -1e-12, "gap {gap} below zero");
            assert!(gap <= 0.5 / beta + 1e-12, "gap {gap} above 1/(2beta) = {}", 0.5 / beta);
        }
    }

    #[test]
    fn smoothed_eps_is_convex_in_a() {
        let mut r = rng();
        for _ in 0..10_000 {
            let a1: f64 = r.gen_range(-4.0..4.0);
            let a2: f64 = r.gen_range(-4.0..4.0);
            let b: f64 = r.gen_range(-4.0..4.0);
            let lam: f64 = r.gen_range(0.0..1.0);
            let eps: f64 = r.gen_range(0.0..0.5);
            let beta: f64 = r.gen_range(0.5..20.0);
            let mid = smoothed_eps(lam * a1 + (1.0 - lam) * a2, b, eps, beta);
            let chord = lam * smoothed_eps(a1, b, eps, beta) + (1.0 - lam) * smoothed_eps(a2, b, eps, beta);
            assert!(mid <= chord + 1e-12);
        }
    }

    #[test]
    fn grad_is_beta_lipschitz() {
        let mut r = rng();
        for _ in 0..10_000 {
            let a1: f64 = r.gen_range(-4.0..4.0);
            let a2: f64 = r.gen_range(-4.0..4.0);
            let b: f64 = r.gen_range(-4.0..4.0);
            let eps: f64 = r.gen_range(0.0..0.5);
            let beta: f64 = r.gen_range(0.5..20.0);
            let dg = (smoothed_eps_grad(a1, b, eps, beta) - smoothed_eps_grad(a2, b, eps, beta)).abs();
            assert!(dg <= beta * (a1 - a2).abs() + 1e-12);
        }
    }

    #[test]
    fn gamma_margin_examples() {
        assert_eq!(gamma_margin(0.5, 1.0), 0.5);
        assert_eq!(gamma_margin(2.0, 1.0), 0.0);
        assert_eq!(gamma_margin(-0.5, 0.25), 0.75);
        // zero iff x >= gamma, and 1-Lipschitz
        let mut r = rng();
        for _ in 0..1000 {
            let x: f64 = r.gen_range(-2.0..2.0);
            let y: f64 = r.gen_range(-2.0..2.0);
            let gamma = 0.7;
            let lx = gamma_margin(x, gamma);
            assert!(lx >= 0.0);
            assert_eq!(lx == 0.0, x >= gamma);
            assert!((lx - gamma_margin(y, gamma)).abs() <= (x - y).abs() + 1e-15);
        }
    }

    #[test]
    fn absolute_and_squared() {
        assert_eq!(absolute(1.0, 3.0), 2.0);
        assert_eq!(squared(1.0, 3.0), 4.0);
        assert_eq!(squared_vec(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(squared_vec(&[1.0], &[1.0, 2.0]).is_err());
        // |a-b| <= eps_insensitive + eps
        let mut r = rng();
        for _ in 0..10_000 {
            let a: f64 = r.gen_range(-4.0..4.0);
            let b: f64 = r.gen_range(-4.0..4.0);
            let eps: f64 = r.gen_range(0.0..1.0);
            assert!(absolute(a, b) <= eps_insensitive(a, b, eps) + eps + 1e-15);
        }
    }

    #[test]
    fn eps_insensitive_is_one_lipschitz_in_a() {
        let mut r = rng();
        for _ in 0..10_000 {
            let a1: f64 = r.gen_range(-4.0..4.0);
            let a2: f64 = r.gen_range(-4.0..4.0);
            let b: f64 = r.gen_range(-4.0..4.0);
            let eps: f64 = r.gen_range(0.0..1.0);
            let d = (eps_insensitive(a1, b, eps) - eps_insensitive(a2, b, eps)).abs();
            assert!(d <= (a1 - a2).abs() + 1e-15);
        }
    }

    #[test]
    fn psi_delta_examples() {
        assert!((psi_delta(0.3, 1.0) - 0.3).abs() < 1e-15);
        assert_eq!(psi_delta(1.0, 2.5), 1.0);
        assert_eq!(psi_delta(0.5, 2.0), 0.75);
    }

    #[test]
    fn loss_params_validation() {
        assert!(LossParams::new(0.01, 100.0, 0.25, 1.0).is_ok());
        assert!(LossParams::new(-0.1, 100.0, 0.25, 1.0).is_err());
        assert!(LossParams::new(0.01, 0.0, 0.25, 1.0).is_err());
        assert!(LossParams::new(0.01, 100.0, 0.0, 1.0).is_err());
        assert!(LossParams::new(0.01, 100.0, 0.25, 0.0).is_err());
    }
}
