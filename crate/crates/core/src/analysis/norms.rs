use alloc::vec::Vec;
use core::ops::Range;

use crate::optimizer::StepDiagnostics;

/// One value per tracked quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormSet {
    pub grad_l2: f64,
    pub norm_x: f64,
    pub norm_y: f64,
    pub norm_z: f64,
    /// `||g|| / ||z||`.
    pub grad_to_weight: f64,
    /// `alpha_t * ||g||_1`.
    pub effective_lr: f64,
}

impl NormSet {
    fn of(d: &StepDiagnostics) -> Self {
        Self {
            grad_l2: d.l2_norm,
            norm_x: d.norm_x,
            norm_y: d.norm_y,
            norm_z: d.norm_z,
            grad_to_weight: if d.norm_z > 0.0 { d.l2_norm / d.norm_z } else { 0.0 },
            effective_lr: d.alpha * d.l1_norm,
        }
    }

    fn fields(&self) -> [f64; 6] {
        [
            self.grad_l2,
            self.norm_x,
            self.norm_y,
            self.norm_z,
            self.grad_to_weight,
            self.effective_lr,
        ]
    }

    fn from_fields(f: [f64; 6]) -> Self {
        Self {
            grad_l2: f[0],
            norm_x: f[1],
            norm_y: f[2],
            norm_z: f[3],
            grad_to_weight: f[4],
            effective_lr: f[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSummary {
    pub first_step: u64,
    pub last_step: u64,
    pub mean: NormSet,
    /// Least-squares slope per step.
    pub slope: NormSet,
}

/// Means and slopes over windows of `window` consecutive records, advancing
/// by `stride`. A trailing partial window is dropped unless it is the only one.
pub fn norm_diagnostics(log: &[StepDiagnostics], window: usize, stride: usize) -> Vec<WindowSummary> {
    assert!(window > 0 && stride > 0, "window and stride must be positive");
    if log.is_empty() {
        return Vec::new();
    }
    let window = window.min(log.len());
    (0..=log.len() - window)
        .step_by(stride)
        .map(|start| summarize(&log[start..start + window]))
        .collect()
}

fn summarize(chunk: &[StepDiagnostics]) -> WindowSummary {
    let n = chunk.len() as f64;
    let steps: Vec<f64> = chunk.iter().map(|d| d.step as f64).collect();
    let t_mean = steps.iter().sum::<f64>() / n;
    let sets: Vec<[f64; 6]> = chunk.iter().map(|d| NormSet::of(d).fields()).collect();
    let mean: [f64; 6] = core::array::from_fn(|k| sets.iter().map(|s| s[k]).sum::<f64>() / n);
    let stt: f64 = steps.iter().map(|t| (t - t_mean) * (t - t_mean)).sum();
    let mut slope = [0.0; 6];
    if stt > 0.0 {
        for (t, s) in steps.iter().zip(&sets) {
            for k in 0..6 {
                slope[k] += (t - t_mean) * (s[k] - mean[k]) / stt;
            }
        }
    }
    WindowSummary {
        first_step: chunk[0].step,
        last_step: chunk[chunk.len() - 1].step,
        mean: NormSet::from_fields(mean),
        slope: NormSet::from_fields(slope),
    }
}

/// Mean over `blocks` of `||u_b|| / ||w_b||`, the per-layer ratio of an update
/// direction to the weights it acts on. Blocks with zero weight norm are skipped.
pub fn block_ratio(update: &[f64], weights: &[f64], blocks: &[Range<usize>]) -> f64 {
    let ratios: Vec<f64> = blocks
        .iter()
        .filter_map(|r| {
            let w = crate::params::l2_norm(&weights[r.clone()]);
            (w > 0.0).then(|| crate::params::l2_norm(&update[r.clone()]) / w)
        })
        .collect();
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64, g: f64, z: f64) -> StepDiagnostics {
        StepDiagnostics {
            step,
            l2_norm: g,
            l1_norm: 2.0 * g,
            alpha: 0.5,
            norm_x: z,
            norm_y: z,
            norm_z: z,
            ..Default::default()
        }
    }

    #[test]
    fn constant_sequences_have_zero_slope() {
        let log: Vec<_> = (1..=40).map(|t| record(t, 2.0, 4.0)).collect();
        let out = norm_diagnostics(&log, 10, 10);
        assert_eq!(out.len(), 4);
        for w in out {
            assert_eq!(w.slope, NormSet::default());
            assert_eq!(w.mean.grad_to_weight, 0.5);
            assert_eq!(w.mean.effective_lr, 2.0);
        }
    }

    #[test]
    fn linear_trend_slope() {
        let log: Vec<_> = (1..=20).map(|t| record(t, 1.0 + 0.25 * t as f64, 1.0)).collect();
        let w = norm_diagnostics(&log, 20, 1)[0];
        assert!((w.slope.grad_l2 - 0.25).abs() < 1e-12);
        assert_eq!((w.first_step, w.last_step), (1, 20));
    }

    #[test]
    fn short_log_gives_one_window() {
        let log: Vec<_> = (1..=3).map(|t| record(t, 1.0, 1.0)).collect();
        assert_eq!(norm_diagnostics(&log, 10, 5).len(), 1);
        assert!(norm_diagnostics(&[], 10, 5).is_empty());
    }

    #[test]
    fn block_ratio_averages_layers() {
        let w = [3.0, 4.0, 1.0, 0.0];
        let u = [0.5, 0.0, 0.0, 2.0];
        assert!((block_ratio(&u, &w, &[0..2, 2..4]) - (0.1 + 2.0) / 2.0).abs() < 1e-15);
    }
}
