use thiserror::Error;

/// How the scalar step size is produced each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Learning-rate free: the scalar comes from the Polyak rule and the
    /// warmup multiplier scales it.
    Polyak,
    /// Constant base learning rate (times the warmup multiplier).
    Fixed { lr: f64 },
    /// Base learning rate divided by the bias-corrected `sqrt(pi/2) * ||g||_1`
    /// EMA, i.e. inverse gradient L1 norm weighting without the Polyak
    /// numerator.
    InverseL1 { lr: f64 },
}

/// Scaling of the weight-decay term applied to the query point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayCoupling {
    /// `alpha^2 * lambda` (fully-decoupled AdamC).
    FullyDecoupled,
    /// `alpha * lambda` (AdamW-style decoupled decay, as in plain Schedule-Free AdamW).
    Decoupled,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl ConfigError {
    pub(crate) fn new(field: &'static str, reason: &'static str) -> Self {
        Self { field, reason }
    }
}

/// All hyper-parameters of the ScheduleFree+ step, plus the variant switches.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperConfig {
    pub step_rule: StepRule,
    /// Linear warmup length; the multiplier is `min(1, t / warmup_steps)`.
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub decay_coupling: DecayCoupling,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Averaging power on the step index.
    pub r: f64,
    /// Power on `gamma_max` in the averaging weight (`weight_lr_power`).
    pub p: f64,
    /// Steps during which `c_t = 1` (no averaging).
    pub c_warmup: u64,
    pub sf_beta: f64,
    pub sf_beta_max: f64,
    /// Length of the log-linear beta anneal; 0 disables annealing.
    pub anneal_steps: u64,
    pub polyak_ema: f64,
    pub f_star: f64,
    /// Optional EMA coefficient for the Polyak numerator `F - f_star + I`.
    pub numerator_ema: Option<f64>,
    /// Enables C-refinement averaging `c = (1 - beta) C / (t + 1)`.
    pub refinement_c: Option<f64>,
    /// Global L2 gradient clipping threshold.
    pub clip_norm: Option<f64>,
}

impl Default for HyperConfig {
    fn default() -> Self {
        Self {
            step_rule: StepRule::Polyak,
            warmup_steps: 0,
            weight_decay: 0.0,
            decay_coupling: DecayCoupling::FullyDecoupled,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            r: 0.0,
            p: 2.0,
            c_warmup: 0,
            sf_beta: 0.9,
            sf_beta_max: 0.9,
            anneal_steps: 0,
            polyak_ema: 0.9,
            f_star: 0.0,
            numerator_ema: None,
            refinement_c: None,
            clip_norm: None,
        }
    }
}

fn unit_interval(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must lie in [0, 1)"))
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be finite and non-negative"))
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, "must be finite and positive"))
    }
}

impl HyperConfig {
    /// Plain Schedule-Free AdamW: fixed learning rate, AdamW-style decay, no
    /// inner momentum, no anneal, no c-warmup.
    pub fn schedule_free(lr: f64) -> Self {
        Self {
            step_rule: StepRule::Fixed { lr },
            decay_coupling: DecayCoupling::Decoupled,
            beta1: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.step_rule {
            StepRule::Polyak => {}
            StepRule::Fixed { lr } | StepRule::InverseL1 { lr } => positive("lr", lr)?,
        }
        non_negative("weight_decay", self.weight_decay)?;
        unit_interval("beta1", self.beta1)?;
        unit_interval("beta2", self.beta2)?;
        positive("eps", self.eps)?;
        non_negative("r", self.r)?;
        non_negative("p", self.p)?;
        unit_interval("sf_beta", self.sf_beta)?;
        unit_interval("sf_beta_max", self.sf_beta_max)?;
        if self.anneal_steps > 0 && self.sf_beta > self.sf_beta_max {
            return Err(ConfigError::new(
                "sf_beta_max",
                "must be >= sf_beta when annealing is enabled",
            ));
        }
        unit_interval("polyak_ema", self.polyak_ema)?;
        if !self.f_star.is_finite() {
            return Err(ConfigError::new("f_star", "must be finite"));
        }
        if let Some(beta) = self.numerator_ema {
            unit_interval("numerator_ema", beta)?;
        }
        if let Some(c) = self.refinement_c {
            positive("refinement_c", c)?;
        }
        if let Some(clip) = self.clip_norm {
            positive("clip_norm", clip)?;
        }
        Ok(())
    }

    /// Linear warmup multiplier at step `t >= 1`.
    pub fn warmup_multiplier(&self, t: u64) -> f64 {
        if self.warmup_steps == 0 || t >= self.warmup_steps {
            1.0
        } else {
            t as f64 / self.warmup_steps as f64
        }
    }
}
