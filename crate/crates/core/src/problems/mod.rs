//! Deterministic and stochastic objectives behind a uniform gradient oracle.

mod logistic;
mod mlp;
mod quadratic;
mod valley;

pub use logistic::LogisticSynthetic;
pub use mlp::{NormalizedMlp, DEFAULT_INPUT_DIM, DEFAULT_SAMPLES};
pub use quadratic::Quadratic;
pub use valley::NonsmoothValley;

use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("batch size {batch} exceeds the {samples} available samples")]
    BatchTooLarge { batch: usize, samples: usize },
    #[error("batch size must be positive")]
    EmptyBatch,
    #[error("parameter vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Loss and gradient returned by one oracle call.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// A stochastic first-order oracle. Every call is a pure function of
/// `(params, seed, batch_size)`.
pub trait Problem: Send + Sync {
    fn dim(&self) -> usize;

    /// Exact (full-data, noise-free) objective.
    fn loss(&self, params: &[f64]) -> f64;

    /// Exact objective and gradient.
    fn full_oracle(&self, params: &[f64]) -> Sample;

    /// Minibatch estimate of loss and gradient.
    fn oracle(&self, params: &[f64], seed: u64, batch_size: usize) -> Result<Sample, ProblemError>;

    fn f_star(&self) -> Option<f64> {
        None
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    /// Deterministic starting point.
    fn initial_point(&self, seed: u64) -> Vec<f64>;

    /// Parameter ranges on which the objective is invariant to positive scaling.
    fn scale_invariant_blocks(&self) -> Vec<Range<usize>> {
        Vec::new()
    }
}

/// Mixes two seeds (splitmix64 finalizer), used to derive per-step seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, salt))
}

pub(crate) fn check_dim(params: &[f64], expected: usize) -> Result<(), ProblemError> {
    if params.len() == expected {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch {
            expected,
            got: params.len(),
        })
    }
}

/// Sorted minibatch indices drawn without replacement; the identity order when
/// the batch covers every sample.
pub(crate) fn batch_indices(
    samples: usize,
    batch: usize,
    seed: u64,
    salt: u64,
) -> Result<Vec<usize>, ProblemError> {
    if batch == 0 {
        return Err(ProblemError::EmptyBatch);
    }
    if batch > samples {
        return Err(ProblemError::BatchTooLarge { batch, samples });
    }
    if batch == samples {
        return Ok((0..samples).collect());
    }
    let mut idx = rand::seq::index::sample(&mut rng(seed, salt), samples, batch).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

pub(crate) fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    use rand::Rng;
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}
