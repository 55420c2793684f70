//! Flat parameter vectors and the handful of reductions the optimizers need.

use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

/// A fixed-dimension vector of model parameters (or of any per-parameter
/// optimizer buffer: moments, gradients, averages).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self(alloc::vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        first_non_finite(&self.0)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl From<&[f64]> for ParamVector {
    fn from(values: &[f64]) -> Self {
        Self(values.to_vec())
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

pub fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// Multiplier that brings `grad` to global L2 norm at most `max_norm`.
///
/// Returns 1.0 when no clipping is needed.
pub fn clip_factor(grad: &[f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grad);
    if norm > max_norm && norm > 0.0 {
        max_norm / norm
    } else {
        1.0
    }
}

/// Clips `grad` in place to global L2 norm at most `max_norm`. Returns true
/// when the gradient was rescaled.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> bool {
    let factor = clip_factor(grad, max_norm);
    if factor < 1.0 {
        grad.iter_mut().for_each(|g| *g *= factor);
        true
    } else {
        false
    }
}

/// L2 norm restricted to the given index ranges.
pub fn block_l2_norm(v: &[f64], blocks: &[core::ops::Range<usize>]) -> f64 {
    let sq: f64 = blocks
        .iter()
        .map(|r| v[r.clone()].iter().map(|x| x * x).sum::<f64>())
        .sum();
    libm::sqrt(sq)
}
