use alloc::vec::Vec;

use rand::Rng;

use super::{batch_indices, check_dim, rng, standard_normals, Problem, ProblemError, Sample};

/// Binary logistic regression on fixed synthetic Gaussian features.
///
/// Labels in `{-1, +1}` are drawn from the logistic model of a planted
/// separator, so the data are not linearly separable and a finite minimizer
/// exists.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticSynthetic {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    planted: Vec<f64>,
}

const DATA_SALT: u64 = 0x1091;
const BATCH_SALT: u64 = 0xba7c;

/// `ln(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl LogisticSynthetic {
    pub fn new(dim: usize, samples: usize, seed: u64) -> Self {
        assert!(dim > 0 && samples > 0, "logistic problem needs data");
        let mut rng = rng(seed, DATA_SALT);
        let scale = 3.0 / libm::sqrt(dim as f64);
        let planted: Vec<f64> = standard_normals(&mut rng, dim)
            .into_iter()
            .map(|w| w * scale)
            .collect();
        let features = standard_normals(&mut rng, dim * samples);
        let labels = features
            .chunks_exact(dim)
            .map(|x| {
                let p = sigmoid(crate::params::dot(x, &planted));
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Self {
            dim,
            features,
            labels,
            planted,
        }
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn planted(&self) -> &[f64] {
        &self.planted
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    fn evaluate(&self, params: &[f64], indices: impl Iterator<Item = usize>) -> Sample {
        let mut grad = alloc::vec![0.0; self.dim];
        let mut loss = 0.0;
        let mut count = 0usize;
        for i in indices {
            let x = self.row(i);
            let y = self.labels[i];
            let margin = y * crate::params::dot(x, params);
            loss += softplus(-margin);
            let coef = -y * sigmoid(-margin);
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += coef * xi;
            }
            count += 1;
        }
        let n = count as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Sample {
            loss: loss / n,
            grad,
        }
    }
}

impl Problem for LogisticSynthetic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, params: &[f64]) -> f64 {
        self.evaluate(params, 0..self.samples()).loss
    }

    fn full_oracle(&self, params: &[f64]) -> Sample {
        self.evaluate(params, 0..self.samples())
    }

    fn oracle(&self, params: &[f64], seed: u64, batch_size: usize) -> Result<Sample, ProblemError> {
        check_dim(params, self.dim)?;
        let idx = batch_indices(self.samples(), batch_size, seed, BATCH_SALT)?;
        Ok(self.evaluate(params, idx.into_iter()))
    }

    fn initial_point(&self, _seed: u64) -> Vec<f64> {
        alloc::vec![0.0; self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_ln2() {
        let p = LogisticSynthetic::new(5, 64, 3);
        assert!((p.loss(&[0.0; 5]) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_zero_is_half_mean_label_feature() {
        let p = LogisticSynthetic::new(4, 50, 11);
        let g = p.full_oracle(&[0.0; 4]).grad;
        for j in 0..4 {
            let expected: f64 = -(0..50).map(|i| p.labels[i] * p.row(i)[j]).sum::<f64>() / 100.0;
            assert!((g[j] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn full_batch_ignores_seed() {
        let p = LogisticSynthetic::new(3, 20, 1);
        let w = [0.3, -0.2, 0.1];
        let a = p.oracle(&w, 1, 20).unwrap();
        let b = p.oracle(&w, 999, 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            p.oracle(&w, 1, 21),
            Err(ProblemError::BatchTooLarge {
                batch: 21,
                samples: 20
            })
        );
    }

    #[test]
    fn stable_at_large_margins() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
