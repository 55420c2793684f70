//! AdamW and the AdamC variants driven by a learning-rate schedule.

use super::schedule::Schedule;
use crate::optimizer::{check_gradient, Optimizer, StepDiagnostics, StepError};
use crate::params::{self, ParamVector};
use crate::sf::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    /// `gamma_t * lambda * z`.
    AdamW,
    /// `gamma_t^2 / gamma_max * lambda * z`, `gamma_max` the running max of the
    /// realized schedule.
    AdamCCoupled,
    /// `gamma_t^2 * lambda * z`.
    AdamCFull,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub mode: DecayMode,
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            weight_decay: 0.0,
            mode: DecayMode::AdamW,
            clip_norm: None,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&value) {
                return Err(ConfigError::new(field, "must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) {
            return Err(ConfigError::new("eps", "must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(ConfigError::new("weight_decay", "must be finite and non-negative"));
        }
        if let Some(clip) = self.clip_norm {
            if !(clip > 0.0) {
                return Err(ConfigError::new("clip_norm", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub z: ParamVector,
    pub m: ParamVector,
    pub v: ParamVector,
    pub direction: ParamVector,
    pub gamma_max: f64,
    pub t: u64,
}

impl AdamState {
    pub fn new(theta0: ParamVector) -> Self {
        let dim = theta0.dim();
        Self {
            z: theta0,
            m: ParamVector::zeros(dim),
            v: ParamVector::zeros(dim),
            direction: ParamVector::zeros(dim),
            gamma_max: 0.0,
            t: 0,
        }
    }
}

/// One bias-corrected Adam step at learning rate `lr` with the configured
/// weight-decay coupling. Decay and the Adam direction both act on the
/// pre-step `z`.
pub fn adam_step(
    state: &mut AdamState,
    cfg: &AdamConfig,
    lr: f64,
    grad: &[f64],
    loss: f64,
) -> Result<StepDiagnostics, StepError> {
    let t = state.t + 1;
    check_gradient(grad, state.z.dim(), t)?;
    state.gamma_max = state.gamma_max.max(lr);

    let scale = cfg
        .clip_norm
        .map_or(1.0, |max| params::clip_factor(grad, max));
    let decay = cfg.weight_decay
        * match cfg.mode {
            DecayMode::AdamW => lr,
            DecayMode::AdamCCoupled if state.gamma_max > 0.0 => lr * lr / state.gamma_max,
            DecayMode::AdamCCoupled => 0.0,
            DecayMode::AdamCFull => lr * lr,
        };
    let inv_bias1 = 1.0 / (1.0 - libm::pow(cfg.beta1, t as f64));
    let inv_bias2 = 1.0 / (1.0 - libm::pow(cfg.beta2, t as f64));

    let mut sq_z = 0.0;
    let mut sq_u = 0.0;
    for i in 0..grad.len() {
        let g = scale * grad[i];
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let u = m * inv_bias1 / (libm::sqrt(v * inv_bias2) + cfg.eps);
        let z = state.z[i] - decay * state.z[i] - lr * u;
        state.m[i] = m;
        state.v[i] = v;
        state.direction[i] = u;
        state.z[i] = z;
        sq_z += z * z;
        sq_u += u * u;
    }
    state.t = t;
    if let Some(index) = state.z.first_non_finite() {
        return Err(StepError::NonFiniteParameter { step: t, index });
    }

    let norm_z = libm::sqrt(sq_z);
    Ok(StepDiagnostics {
        step: t,
        loss,
        l1_norm: scale * params::l1_norm(grad),
        l2_norm: scale * params::l2_norm(grad),
        eta: lr,
        warmup: 1.0,
        alpha: lr,
        c: 1.0,
        norm_x: norm_z,
        norm_y: norm_z,
        norm_z,
        update_norm: libm::sqrt(sq_u),
        clipped: scale < 1.0,
        ..StepDiagnostics::default()
    })
}

/// Adam-family optimizer following a schedule.
#[derive(Debug, Clone)]
pub struct AdamBaseline {
    cfg: AdamConfig,
    schedule: Schedule,
    state: AdamState,
}

impl AdamBaseline {
    pub fn new(cfg: AdamConfig, schedule: Schedule, theta0: ParamVector) -> Result<Self, ConfigError> {
        cfg.validate()?;
        schedule.validate()?;
        Ok(Self {
            cfg,
            schedule,
            state: AdamState::new(theta0),
        })
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }
}

impl Optimizer for AdamBaseline {
    fn dim(&self) -> usize {
        self.state.z.dim()
    }

    fn query_point(&self) -> &[f64] {
        &self.state.z
    }

    fn model_point(&self) -> &[f64] {
        &self.state.z
    }

    fn base_point(&self) -> &[f64] {
        &self.state.z
    }

    fn last_direction(&self) -> &[f64] {
        &self.state.direction
    }

    fn step(&mut self, grad: &[f64], loss: f64) -> Result<StepDiagnostics, StepError> {
        let lr = self.schedule.value(self.state.t + 1);
        adam_step(&mut self.state, &self.cfg, lr, grad, loss)
    }
}
