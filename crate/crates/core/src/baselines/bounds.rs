//! Numerical evaluation of convex last-iterate bounds for a schedule, and the
//! optimal weighting for a fixed gradient-norm sequence.

use alloc::vec::Vec;

use crate::sf::ConfigError;

/// Inputs to [`anytime_bound`]: schedule multipliers `eta_i`, peak rate `gamma`,
/// initial distance `D`, and expected squared gradient norms.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInput {
    pub multipliers: Vec<f64>,
    pub peak: f64,
    pub distance: f64,
    pub grad_sq_norms: Vec<f64>,
}

impl BoundInput {
    /// Flat gradient norms `E||g||^2 = G^2`.
    pub fn flat(multipliers: Vec<f64>, peak: f64, distance: f64, grad_norm: f64) -> Self {
        let n = multipliers.len();
        Self {
            multipliers,
            peak,
            distance,
            grad_sq_norms: alloc::vec![grad_norm * grad_norm; n],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.multipliers.len() != self.grad_sq_norms.len() {
            return Err(ConfigError::new("grad_sq_norms", "length must match the schedule"));
        }
        if self.multipliers.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(ConfigError::new("multipliers", "must be finite and non-negative"));
        }
        if self.grad_sq_norms.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(ConfigError::new("grad_sq_norms", "must be finite and positive"));
        }
        if !(self.peak > 0.0 && self.peak.is_finite()) {
            return Err(ConfigError::new("peak", "must be finite and positive"));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(ConfigError::new("distance", "must be finite and positive"));
        }
        Ok(())
    }
}

/// Prefix sums shared by every query on one input.
#[derive(Debug, Clone)]
pub struct BoundEvaluator<'a> {
    input: &'a BoundInput,
    /// `S[k] = sum_{i <= k} eta_i`, `S[0] = 0`.
    eta_sum: Vec<f64>,
    /// `Q[k] = sum_{i <= k} eta_i^2 E||g_i||^2`.
    weighted_sq: Vec<f64>,
}

impl<'a> BoundEvaluator<'a> {
    pub fn new(input: &'a BoundInput) -> Self {
        let n = input.multipliers.len();
        let mut eta_sum = Vec::with_capacity(n + 1);
        let mut weighted_sq = Vec::with_capacity(n + 1);
        eta_sum.push(0.0);
        weighted_sq.push(0.0);
        for (eta, g2) in input.multipliers.iter().zip(&input.grad_sq_norms) {
            eta_sum.push(eta_sum.last().unwrap() + eta);
            weighted_sq.push(weighted_sq.last().unwrap() + eta * eta * g2);
        }
        Self {
            input,
            eta_sum,
            weighted_sq,
        }
    }

    /// Bound on `E[f(x_t) - f_*]` at step `t` (1-based).
    ///
    /// Trailing zero multipliers leave the iterate unchanged, so the bound is
    /// evaluated at the last step with a positive multiplier. Returns infinity
    /// when no step has been taken.
    pub fn at(&self, t: usize) -> f64 {
        let eta = &self.input.multipliers;
        let mut t = t.min(eta.len());
        while t > 0 && eta[t - 1] == 0.0 {
            t -= 1;
        }
        if t == 0 {
            return f64::INFINITY;
        }
        let gamma = self.input.peak;
        let d2 = self.input.distance * self.input.distance;
        let s = &self.eta_sum;
        let q = &self.weighted_sq;

        let head = (d2 + gamma * gamma * q[t]) / (2.0 * gamma * s[t]);
        let mut tail = 0.0;
        for k in 1..t {
            let after = s[t] - s[k];
            let from = s[t] - s[k - 1];
            tail += eta[k - 1] / after * ((q[t] - q[k - 1]) / from);
        }
        head + 0.5 * gamma * tail
    }

    pub fn curve(&self) -> Vec<f64> {
        (1..=self.input.multipliers.len()).map(|t| self.at(t)).collect()
    }
}

/// Convenience wrapper for a single query.
pub fn anytime_bound(input: &BoundInput, t: usize) -> f64 {
    BoundEvaluator::new(input).at(t)
}

/// Weights `gamma_t` proportional to `1 / ||g_t||^2`, normalized to sum to one.
pub fn optimal_weights(grad_sq_norms: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = grad_sq_norms.iter().map(|g| 1.0 / g).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|w| w / total).collect()
}

/// Step sizes minimizing `(D^2 + sum gamma_t^2 ||g_t||^2) / (2 sum gamma_t)`
/// over all positive sequences: `gamma_t = D / (sqrt(sum_s 1/||g_s||^2) ||g_t||^2)`.
pub fn optimal_step_sizes(grad_sq_norms: &[f64], distance: f64) -> Vec<f64> {
    let total: f64 = grad_sq_norms.iter().map(|g| 1.0 / g).sum();
    let scale = distance / libm::sqrt(total);
    grad_sq_norms.iter().map(|g| scale / g).collect()
}

/// `(D^2 + sum gamma_t^2 ||g_t||^2) / (2 sum gamma_t)`.
pub fn weighted_regret_objective(weights: &[f64], grad_sq_norms: &[f64], distance: f64) -> f64 {
    let num: f64 = weights
        .iter()
        .zip(grad_sq_norms)
        .map(|(w, g)| w * w * g)
        .sum();
    let den: f64 = weights.iter().sum();
    (distance * distance + num) / (2.0 * den)
}
