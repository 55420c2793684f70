//! ScheduleFree+: Schedule-Free averaging around an Adam base step with inner
//! momentum, a Polyak step size, and fully-decoupled AdamC weight decay.
//!
//! Three sequences are tracked. `z` takes the Adam steps, `x` is a weighted
//! running average of `z` (the model to evaluate), and `y` interpolates the
//! two and is where gradients are queried:
//!
//! ```text
//! z_t = z_{t-1} - alpha_t^2 lambda y_{t-1} - alpha_t m_hat_t / (sqrt(v_hat_t) + eps)
//! x_t = (1 - c_t) x_{t-1} + c_t z_t
//! y_t = beta_t x_t + (1 - beta_t) z_t
//! ```

mod config;
mod polyak;
mod weights;

pub use config::{ConfigError, DecayCoupling, HyperConfig, StepRule};
pub use polyak::{
    l1_denominator_pair, polyak_scalar, update_l1_ema, PolyakError, PolyakInput, PolyakOutput,
    SQRT_HALF_PI,
};
pub use weights::{anneal_beta, anneal_progress, averaging_coeff, beta_at_progress, Averaging};

use crate::optimizer::{check_gradient, Optimizer, StepDiagnostics, StepError};
use crate::params::{self, ParamVector};

/// Mutable optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct SfState {
    pub z: ParamVector,
    pub x: ParamVector,
    pub y: ParamVector,
    pub m: ParamVector,
    pub v: ParamVector,
    /// Last preconditioned direction `m_hat / (sqrt(v_hat) + eps)`.
    pub direction: ParamVector,
    /// Polyak L1 EMA `e_t`.
    pub l1_ema: f64,
    /// Polyak numerator EMA (only advanced when enabled).
    pub numerator_ema: f64,
    /// Averaging weight sum `W_t`.
    pub weight_sum: f64,
    pub gamma_max: f64,
    /// Number of completed steps.
    pub t: u64,
}

impl SfState {
    /// Starts all three sequences at `theta0`. `gamma_max` starts at `eps`.
    pub fn new(theta0: ParamVector, cfg: &HyperConfig) -> Self {
        let dim = theta0.dim();
        Self {
            z: theta0.clone(),
            x: theta0.clone(),
            y: theta0,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            direction: ParamVector::zeros(dim),
            l1_ema: 0.0,
            numerator_ema: 0.0,
            weight_sum: 0.0,
            gamma_max: cfg.eps,
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.z.dim()
    }

    /// Query point `y` for the next gradient evaluation.
    pub fn query_point(&self) -> &ParamVector {
        &self.y
    }

    /// Averaged point `x`, the model to evaluate and return.
    pub fn average_point(&self) -> &ParamVector {
        &self.x
    }
}

/// One ScheduleFree+ step, given the gradient and loss measured at `state.y`.
///
/// The gradient is clipped (when configured) before any use. A zero Polyak
/// denominator is not an error here: the step proceeds with `eta = 0` and sets
/// `denominator_zero` in the diagnostics. On `NonFiniteParameter` the state
/// holds the diverged values and should be discarded.
pub fn sf_step(
    state: &mut SfState,
    cfg: &HyperConfig,
    grad: &[f64],
    loss: f64,
) -> Result<StepDiagnostics, StepError> {
    let t = state.t + 1;
    check_gradient(grad, state.dim(), t)?;

    // 1. interpolation anneal
    let tau = anneal_progress(cfg, t);
    let beta = anneal_beta(cfg, t);

    // 2. global metrics and step size
    let scale = cfg
        .clip_norm
        .map_or(1.0, |max| params::clip_factor(grad, max));
    let l1_norm = scale * params::l1_norm(grad);
    let l2_norm = scale * params::l2_norm(grad);
    let inner: f64 = grad
        .iter()
        .zip(state.z.iter().zip(state.x.iter()))
        .map(|(g, (z, x))| g * (z - x))
        .sum();
    let inner_correction = beta * scale * inner;

    let mut denominator_zero = false;
    let eta = match cfg.step_rule {
        StepRule::Polyak => {
            let input = PolyakInput {
                step: t,
                loss,
                l1_norm,
                inner_correction,
            };
            match polyak_scalar(cfg, state.l1_ema, state.numerator_ema, input) {
                Ok(out) => {
                    state.l1_ema = out.l1_ema;
                    state.numerator_ema = out.numerator_ema;
                    out.eta
                }
                Err(PolyakError::DenominatorZero { numerator_ema, .. }) => {
                    state.l1_ema *= cfg.polyak_ema;
                    state.numerator_ema = numerator_ema;
                    denominator_zero = true;
                    0.0
                }
            }
        }
        StepRule::InverseL1 { lr } => {
            let (e, e_hat) = update_l1_ema(cfg, state.l1_ema, l1_norm, t);
            state.l1_ema = e;
            if e_hat > 0.0 {
                lr / e_hat
            } else {
                denominator_zero = true;
                0.0
            }
        }
        StepRule::Fixed { lr } => {
            state.l1_ema = update_l1_ema(cfg, state.l1_ema, l1_norm, t).0;
            lr
        }
    };
    let warmup = cfg.warmup_multiplier(t);
    let alpha = warmup * eta;
    state.gamma_max = state.gamma_max.max(alpha);

    // 3. averaging weights
    let avg = averaging_coeff(cfg, t, state.gamma_max, beta, &mut state.weight_sum);

    // 4. per-parameter updates
    let decay = match cfg.decay_coupling {
        DecayCoupling::FullyDecoupled => alpha * alpha * cfg.weight_decay,
        DecayCoupling::Decoupled => alpha * cfg.weight_decay,
    };
    let inv_bias1 = 1.0 / (1.0 - libm::pow(cfg.beta1, t as f64));
    let inv_bias2 = 1.0 / (1.0 - libm::pow(cfg.beta2, t as f64));
    let (mut sq_x, mut sq_y, mut sq_z, mut sq_u) = (0.0, 0.0, 0.0, 0.0);
    let copy = avg.c == 1.0;

    for i in 0..state.dim() {
        let g = scale * grad[i];
        let mut z = state.z[i] - decay * state.y[i];
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let u = m * inv_bias1 / (libm::sqrt(v * inv_bias2) + cfg.eps);
        z -= alpha * u;
        let x = if copy {
            z
        } else {
            (1.0 - avg.c) * state.x[i] + avg.c * z
        };
        let y = if x == z { z } else { beta * x + (1.0 - beta) * z };

        state.m[i] = m;
        state.v[i] = v;
        state.direction[i] = u;
        state.z[i] = z;
        state.x[i] = x;
        state.y[i] = y;
        sq_x += x * x;
        sq_y += y * y;
        sq_z += z * z;
        sq_u += u * u;
    }
    state.t = t;

    for buf in [&state.z, &state.x, &state.y] {
        if let Some(index) = buf.first_non_finite() {
            return Err(StepError::NonFiniteParameter { step: t, index });
        }
    }

    Ok(StepDiagnostics {
        step: t,
        tau,
        beta_tilde: beta,
        loss,
        l1_norm,
        l2_norm,
        inner_correction,
        eta,
        warmup,
        alpha,
        c: avg.c,
        w: avg.w,
        norm_x: libm::sqrt(sq_x),
        norm_y: libm::sqrt(sq_y),
        norm_z: libm::sqrt(sq_z),
        update_norm: libm::sqrt(sq_u),
        clipped: scale < 1.0,
        denominator_zero,
    })
}

/// ScheduleFree+ bound to its configuration.
#[derive(Debug, Clone)]
pub struct ScheduleFreePlus {
    cfg: HyperConfig,
    state: SfState,
}

impl ScheduleFreePlus {
    pub fn new(cfg: HyperConfig, theta0: ParamVector) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let state = SfState::new(theta0, &cfg);
        Ok(Self { cfg, state })
    }

    pub fn config(&self) -> &HyperConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SfState {
        &self.state
    }

    /// Consumes the optimizer and returns the averaged iterate `x_T`.
    pub fn into_average(self) -> ParamVector {
        self.state.x
    }
}

impl Optimizer for ScheduleFreePlus {
    fn dim(&self) -> usize {
        self.state.dim()
    }

    fn query_point(&self) -> &[f64] {
        &self.state.y
    }

    fn model_point(&self) -> &[f64] {
        &self.state.x
    }

    fn base_point(&self) -> &[f64] {
        &self.state.z
    }

    fn last_direction(&self) -> &[f64] {
        &self.state.direction
    }

    fn step(&mut self, grad: &[f64], loss: f64) -> Result<StepDiagnostics, StepError> {
        sf_step(&mut self.state, &self.cfg, grad, loss)
    }
}
