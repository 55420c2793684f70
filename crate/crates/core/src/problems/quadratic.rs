use alloc::vec::Vec;

use super::{check_dim, rng, standard_normals, Problem, ProblemError, Sample};

/// `f(w) = 1/2 sum_i h_i w_i^2` with log-spaced curvatures `h_i` in
/// `[1, condition_number]`. Minibatch gradients carry additive Gaussian noise
/// of standard deviation `noise_std / sqrt(batch_size)` per coordinate; the
/// reported loss is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    curvature: Vec<f64>,
    noise_std: f64,
}

const NOISE_SALT: u64 = 0x51ad;
const INIT_SALT: u64 = 0x1417;

impl Quadratic {
    pub fn new(dim: usize, condition_number: f64, noise_std: f64) -> Self {
        assert!(dim > 0, "quadratic needs at least one dimension");
        assert!(condition_number >= 1.0, "condition number must be >= 1");
        assert!(noise_std >= 0.0, "noise_std must be non-negative");
        let curvature = (0..dim)
            .map(|i| {
                if dim == 1 {
                    1.0
                } else {
                    libm::pow(condition_number, i as f64 / (dim - 1) as f64)
                }
            })
            .collect();
        Self {
            curvature,
            noise_std,
        }
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

impl Problem for Quadratic {
    fn dim(&self) -> usize {
        self.curvature.len()
    }

    fn loss(&self, params: &[f64]) -> f64 {
        0.5 * params
            .iter()
            .zip(&self.curvature)
            .map(|(w, h)| h * w * w)
            .sum::<f64>()
    }

    fn full_oracle(&self, params: &[f64]) -> Sample {
        Sample {
            loss: self.loss(params),
            grad: params.iter().zip(&self.curvature).map(|(w, h)| h * w).collect(),
        }
    }

    fn oracle(&self, params: &[f64], seed: u64, batch_size: usize) -> Result<Sample, ProblemError> {
        check_dim(params, self.dim())?;
        if batch_size == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        let mut sample = self.full_oracle(params);
        if self.noise_std > 0.0 {
            let sd = self.noise_std / libm::sqrt(batch_size as f64);
            let noise = standard_normals(&mut rng(seed, NOISE_SALT), self.dim());
            for (g, n) in sample.grad.iter_mut().zip(noise) {
                *g += sd * n;
            }
        }
        Ok(sample)
    }

    fn f_star(&self) -> Option<f64> {
        Some(0.0)
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(alloc::vec![0.0; self.dim()])
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        standard_normals(&mut rng(seed, INIT_SALT), self.dim())
    }
}
