use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_dim, rng, standard_normals, Problem, ProblemError, Sample};

/// `f(w) = ||w||_1`, with subgradient `sign(w)` (0 at the kink).
///
/// With `noise_std > 0` minibatch subgradients carry additive Gaussian noise of
/// standard deviation `noise_std / sqrt(batch_size)`; the loss stays exact.
#[derive(Debug, Clone, PartialEq)]
pub struct NonsmoothValley {
    dim: usize,
    noise_std: f64,
}

const NOISE_SALT: u64 = 0xa11e;
const INIT_SALT: u64 = 0x7a11;

impl NonsmoothValley {
    pub fn new(dim: usize) -> Self {
        Self::with_noise(dim, 0.0)
    }

    pub fn with_noise(dim: usize, noise_std: f64) -> Self {
        assert!(dim > 0, "valley needs at least one dimension");
        assert!(noise_std >= 0.0, "noise_std must be non-negative");
        Self { dim, noise_std }
    }

    /// L2 Lipschitz constant of the deterministic objective.
    pub fn lipschitz(&self) -> f64 {
        libm::sqrt(self.dim as f64)
    }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Problem for NonsmoothValley {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, params: &[f64]) -> f64 {
        crate::params::l1_norm(params)
    }

    fn full_oracle(&self, params: &[f64]) -> Sample {
        Sample {
            loss: self.loss(params),
            grad: params.iter().map(|w| sign(*w)).collect(),
        }
    }

    fn oracle(&self, params: &[f64], seed: u64, batch_size: usize) -> Result<Sample, ProblemError> {
        check_dim(params, self.dim)?;
        if batch_size == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        let mut sample = self.full_oracle(params);
        if self.noise_std > 0.0 {
            let sd = self.noise_std / libm::sqrt(batch_size as f64);
            let mut rng = rng(seed, NOISE_SALT);
            for g in sample.grad.iter_mut() {
                *g += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(sample)
    }

    fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(alloc::vec![0.0; self.dim])
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        standard_normals(&mut rng(seed, INIT_SALT), self.dim)
    }
}
