//! The interface the run loop drives, shared by ScheduleFree+ and the baselines.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StepError {
    #[error("gradient has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient entry at index {index} (step {step})")]
    NonFiniteGradient { step: u64, index: usize },
    #[error("non-finite parameter at index {index} after step {step}")]
    NonFiniteParameter { step: u64, index: usize },
}

/// Everything measured during one optimizer step.
///
/// Fields that do not apply to an optimizer hold their neutral value
/// (`c = 1`, `beta_tilde = 0`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    pub step: u64,
    pub tau: f64,
    pub beta_tilde: f64,
    /// Loss at the query point, as supplied to the step.
    pub loss: f64,
    pub l1_norm: f64,
    pub l2_norm: f64,
    pub inner_correction: f64,
    /// Polyak scalar (or the base learning rate in fixed-rate modes).
    pub eta: f64,
    pub warmup: f64,
    /// Effective learning rate `alpha_t = gamma_t * eta_t`.
    pub alpha: f64,
    pub c: f64,
    pub w: f64,
    pub norm_x: f64,
    pub norm_y: f64,
    pub norm_z: f64,
    /// L2 norm of the preconditioned direction `m_hat / (sqrt(v_hat) + eps)`.
    pub update_norm: f64,
    pub clipped: bool,
    /// The Polyak denominator was zero; the step used `eta = 0`.
    pub denominator_zero: bool,
}

pub trait Optimizer {
    fn dim(&self) -> usize;

    /// Point at which the next gradient must be evaluated.
    fn query_point(&self) -> &[f64];

    /// Point to evaluate and ultimately return as the trained model.
    fn model_point(&self) -> &[f64];

    /// Raw iterate sequence (`z`).
    fn base_point(&self) -> &[f64];

    /// Preconditioned direction of the last step, per parameter.
    fn last_direction(&self) -> &[f64];

    /// Advances one step with the gradient and loss measured at `query_point`.
    fn step(&mut self, grad: &[f64], loss: f64) -> Result<StepDiagnostics, StepError>;
}

pub(crate) fn check_gradient(grad: &[f64], expected: usize, step: u64) -> Result<(), StepError> {
    if grad.len() != expected {
        return Err(StepError::DimensionMismatch {
            expected,
            got: grad.len(),
        });
    }
    match crate::params::first_non_finite(grad) {
        Some(index) => Err(StepError::NonFiniteGradient { step, index }),
        None => Ok(()),
    }
}
