//! Small regression MLP whose hidden layers are RMS-normalized.
//!
//! Each hidden layer computes `h = tanh(a / rms(a))` with `a = W h_prev` and
//! no bias, so the loss is invariant to positive rescaling of every hidden
//! weight matrix and the gradient of each such block is orthogonal to it. The
//! linear read-out (weights and bias) is not scale-invariant.

use alloc::vec::Vec;
use core::ops::Range;

use super::{batch_indices, check_dim, rng, standard_normals, Problem, ProblemError, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMlp {
    input_dim: usize,
    width: usize,
    depth: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    init_seed: u64,
}

const DATA_SALT: u64 = 0x3d1a;
const BATCH_SALT: u64 = 0xb47c;
const INIT_SALT: u64 = 0x1d17;

pub const DEFAULT_INPUT_DIM: usize = 8;
pub const DEFAULT_SAMPLES: usize = 512;

/// Per-sample activations kept for the backward pass.
struct Trace {
    /// `h_0 = x, h_1, ..., h_depth`.
    hidden: Vec<Vec<f64>>,
    /// RMS of the pre-activation of each hidden layer.
    rms: Vec<f64>,
    /// Normalized pre-activations.
    normed: Vec<Vec<f64>>,
    output: f64,
}

impl NormalizedMlp {
    pub fn new(width: usize, depth: usize, seed: u64) -> Self {
        Self::with_data(DEFAULT_INPUT_DIM, width, depth, DEFAULT_SAMPLES, seed)
    }

    pub fn with_data(input_dim: usize, width: usize, depth: usize, samples: usize, seed: u64) -> Self {
        assert!(input_dim > 0 && width > 0 && depth > 0 && samples > 0);
        let mut rng = rng(seed, DATA_SALT);
        let teacher: Vec<f64> = standard_normals(&mut rng, input_dim)
            .into_iter()
            .map(|a| 2.0 * a / libm::sqrt(input_dim as f64))
            .collect();
        let inputs = standard_normals(&mut rng, input_dim * samples);
        let noise = standard_normals(&mut rng, samples);
        let targets = inputs
            .chunks_exact(input_dim)
            .zip(noise)
            .map(|(x, n)| {
                let s = crate::params::dot(x, &teacher);
                libm::sin(s) + 0.3 * libm::cos(2.0 * x[0]) + 0.05 * n
            })
            .collect();
        Self {
            input_dim,
            width,
            depth,
            inputs,
            targets,
            init_seed: seed,
        }
    }

    pub fn samples(&self) -> usize {
        self.targets.len()
    }

    fn fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.width
        }
    }

    /// Parameter range of hidden weight matrix `layer` (0-based), row-major
    /// `width x fan_in`.
    pub fn hidden_range(&self, layer: usize) -> Range<usize> {
        assert!(layer < self.depth);
        let first = self.width * self.input_dim;
        let start = if layer == 0 {
            0
        } else {
            first + (layer - 1) * self.width * self.width
        };
        start..start + self.width * self.fan_in(layer)
    }

    /// Read-out weights followed by the read-out bias.
    pub fn readout_range(&self) -> Range<usize> {
        let start = self.hidden_range(self.depth - 1).end;
        start..start + self.width + 1
    }

    /// Named parameter blocks, hidden layers first.
    pub fn layers(&self) -> Vec<(alloc::string::String, Range<usize>)> {
        let mut out: Vec<_> = (0..self.depth)
            .map(|l| (alloc::format!("hidden{}", l + 1), self.hidden_range(l)))
            .collect();
        out.push(("readout".into(), self.readout_range()));
        out
    }

    fn forward(&self, params: &[f64], x: &[f64]) -> Trace {
        let mut hidden = Vec::with_capacity(self.depth + 1);
        let mut rms = Vec::with_capacity(self.depth);
        let mut normed = Vec::with_capacity(self.depth);
        hidden.push(x.to_vec());
        for l in 0..self.depth {
            let w = &params[self.hidden_range(l)];
            let prev = hidden.last().unwrap();
            let fan = self.fan_in(l);
            let a: Vec<f64> = w
                .chunks_exact(fan)
                .map(|row| crate::params::dot(row, prev))
                .collect();
            let r = libm::sqrt(a.iter().map(|v| v * v).sum::<f64>() / self.width as f64)
                .max(f64::MIN_POSITIVE);
            let n: Vec<f64> = a.iter().map(|v| v / r).collect();
            hidden.push(n.iter().map(|v| libm::tanh(*v)).collect());
            rms.push(r);
            normed.push(n);
        }
        let ro = &params[self.readout_range()];
        let output = crate::params::dot(&ro[..self.width], hidden.last().unwrap()) + ro[self.width];
        Trace {
            hidden,
            rms,
            normed,
            output,
        }
    }

    /// Adds the gradient of `0.5 (output - target)^2` to `grad`; returns the loss.
    fn accumulate(&self, params: &[f64], i: usize, grad: &mut [f64]) -> f64 {
        let x = &self.inputs[i * self.input_dim..(i + 1) * self.input_dim];
        let trace = self.forward(params, x);
        let err = trace.output - self.targets[i];

        let ro = self.readout_range();
        let top = trace.hidden.last().unwrap();
        for j in 0..self.width {
            grad[ro.start + j] += err * top[j];
        }
        grad[ro.start + self.width] += err;

        // gradient w.r.t. the current hidden output
        let mut dh: Vec<f64> = params[ro.start..ro.start + self.width]
            .iter()
            .map(|v| err * v)
            .collect();
        for l in (0..self.depth).rev() {
            let h = &trace.hidden[l + 1];
            let n = &trace.normed[l];
            let dn: Vec<f64> = dh.iter().zip(h).map(|(d, h)| d * (1.0 - h * h)).collect();
            let proj = crate::params::dot(&dn, n) / self.width as f64;
            let r = trace.rms[l];
            let da: Vec<f64> = dn.iter().zip(n).map(|(d, n)| (d - n * proj) / r).collect();

            let range = self.hidden_range(l);
            let fan = self.fan_in(l);
            let prev = &trace.hidden[l];
            for (row, d) in da.iter().enumerate() {
                let g = &mut grad[range.start + row * fan..range.start + (row + 1) * fan];
                for (gk, pk) in g.iter_mut().zip(prev) {
                    *gk += d * pk;
                }
            }
            if l > 0 {
                let w = &params[range];
                let mut next = alloc::vec![0.0; fan];
                for (row, d) in da.iter().enumerate() {
                    for (nk, wk) in next.iter_mut().zip(&w[row * fan..(row + 1) * fan]) {
                        *nk += d * wk;
                    }
                }
                dh = next;
            }
        }
        0.5 * err * err
    }

    fn evaluate(&self, params: &[f64], indices: impl Iterator<Item = usize>) -> Sample {
        let mut grad = alloc::vec![0.0; self.dim()];
        let mut loss = 0.0;
        let mut count = 0usize;
        for i in indices {
            loss += self.accumulate(params, i, &mut grad);
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

impl Problem for NormalizedMlp {
    fn dim(&self) -> usize {
        self.readout_range().end
    }

    fn loss(&self, params: &[f64]) -> f64 {
        let total: f64 = (0..self.samples())
            .map(|i| {
                let x = &self.inputs[i * self.input_dim..(i + 1) * self.input_dim];
                let err = self.forward(params, x).output - self.targets[i];
                0.5 * err * err
            })
            .sum();
        total / self.samples() as f64
    }

    fn full_oracle(&self, params: &[f64]) -> Sample {
        self.evaluate(params, 0..self.samples())
    }

    fn oracle(&self, params: &[f64], seed: u64, batch_size: usize) -> Result<Sample, ProblemError> {
        check_dim(params, self.dim())?;
        let idx = batch_indices(self.samples(), batch_size, seed, BATCH_SALT)?;
        Ok(self.evaluate(params, idx.into_iter()))
    }

    fn initial_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = rng(super::mix_seed(seed, self.init_seed), INIT_SALT);
        let mut params = standard_normals(&mut rng, self.dim());
        for l in 0..self.depth {
            let s = 1.0 / libm::sqrt(self.fan_in(l) as f64);
            params[self.hidden_range(l)].iter_mut().for_each(|w| *w *= s);
        }
        let ro = self.readout_range();
        let s = 1.0 / libm::sqrt(self.width as f64);
        params[ro.start..ro.end - 1].iter_mut().for_each(|w| *w *= s);
        params[ro.end - 1] = 0.0;
        params
    }

    fn scale_invariant_blocks(&self) -> Vec<Range<usize>> {
        (0..self.depth).map(|l| self.hidden_range(l)).collect()
    }
}
