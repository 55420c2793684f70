//! Polyak step-size scalar with an L1-norm denominator.
//!
//! The denominator replaces `sum_i g_i^2 / sqrt(v_i)` by `sqrt(pi/2) * ||g||_1`,
//! which agrees in expectation for Gaussian gradients with matched second
//! moments and is far less noisy. The numerator `F(y) - f_* + beta <g, z - x>`
//! is a first-order estimate of `f(z) - f_*`.

use super::config::HyperConfig;
use thiserror::Error;

/// `sqrt(pi / 2)`, the ratio `E|X| / sigma` inverted for `X ~ N(0, sigma^2)`.
pub const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PolyakError {
    /// The bias-corrected L1 EMA is zero (only zero gradients seen so far).
    /// The updated numerator EMA is carried so the caller can keep its state.
    #[error("Polyak denominator is zero at step {step}")]
    DenominatorZero { step: u64, numerator_ema: f64 },
}

/// Per-step inputs to the Polyak rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyakInput {
    /// Step index, starting at 1.
    pub step: u64,
    /// Loss at the query point.
    pub loss: f64,
    /// `||g||_1` of the (clipped) gradient.
    pub l1_norm: f64,
    /// `beta_t * <g, z - x>`.
    pub inner_correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyakOutput {
    pub eta: f64,
    /// Updated (uncorrected) L1 EMA `e_t`.
    pub l1_ema: f64,
    /// Bias-corrected L1 EMA.
    pub l1_ema_hat: f64,
    /// Updated numerator EMA state (unchanged when the numerator EMA is off).
    pub numerator_ema: f64,
    /// Numerator before the clamp at zero.
    pub numerator: f64,
}

/// Advances the L1 EMA and returns `(e_t, e_hat_t)`.
pub fn update_l1_ema(cfg: &HyperConfig, l1_ema: f64, l1_norm: f64, step: u64) -> (f64, f64) {
    let beta = cfg.polyak_ema;
    let e = beta * l1_ema + (1.0 - beta) * l1_norm * SQRT_HALF_PI;
    let e_hat = e / (1.0 - libm::pow(beta, step as f64));
    (e, e_hat)
}

/// Computes the Polyak scalar `max(0, F - f_* + I) / e_hat`.
///
/// `l1_ema` and `numerator_ema` are the EMA states from the previous step.
pub fn polyak_scalar(
    cfg: &HyperConfig,
    l1_ema: f64,
    numerator_ema: f64,
    input: PolyakInput,
) -> Result<PolyakOutput, PolyakError> {
    let (e, e_hat) = update_l1_ema(cfg, l1_ema, input.l1_norm, input.step);

    let raw = input.loss - cfg.f_star + input.inner_correction;
    let (numerator, numerator_state) = match cfg.numerator_ema {
        Some(beta) => {
            let state = beta * numerator_ema + (1.0 - beta) * raw;
            (state / (1.0 - libm::pow(beta, input.step as f64)), state)
        }
        None => (raw, numerator_ema),
    };

    if e_hat <= 0.0 {
        return Err(PolyakError::DenominatorZero {
            step: input.step,
            numerator_ema: numerator_state,
        });
    }

    Ok(PolyakOutput {
        eta: numerator.max(0.0) / e_hat,
        l1_ema: e,
        l1_ema_hat: e_hat,
        numerator_ema: numerator_state,
        numerator,
    })
}

/// Exact and L1-approximated Adam-weighted squared gradient norm.
///
/// `exact = sum_i g_i^2 / sqrt(v_i)` (with `eps` standing in for a zero
/// `sqrt(v_i)`), `approx = sqrt(pi/2) * ||g||_1`.
pub fn l1_denominator_pair(grad: &[f64], v: &[f64], eps: f64) -> (f64, f64) {
    debug_assert_eq!(grad.len(), v.len());
    let exact = grad
        .iter()
        .zip(v)
        .map(|(g, v)| {
            let denom = if *v > 0.0 { libm::sqrt(*v) } else { eps };
            g * g / denom
        })
        .sum();
    let approx = SQRT_HALF_PI * crate::params::l1_norm(grad);
    (exact, approx)
}
