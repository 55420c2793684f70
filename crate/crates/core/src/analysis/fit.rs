use alloc::vec::Vec;

use thiserror::Error;

/// Fit of `f(t) = a / sqrt(t + b) + c` to a loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms_residual: f64,
    pub r_squared: f64,
    /// First and last step inside the fit window.
    pub window: (f64, f64),
    pub n_points: usize,
}

impl CurveFit {
    pub fn predict(&self, t: f64) -> f64 {
        if self.a == 0.0 {
            return self.c;
        }
        self.a / libm::sqrt(t + self.b) + self.c
    }

    /// Asymptotic loss, the estimate of the optimal value.
    pub fn f_star_estimate(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit window ({0}, {1}) is not a sub-interval of [0, 1]")]
    InvalidWindow(f64, f64),
    #[error("fit window holds {got} points, need at least {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("loss values must be positive and finite (step {step} has {value})")]
    InvalidLoss { step: f64, value: f64 },
    #[error("curve fit refinement left the feasible region")]
    FitDiverged { grid_fit: CurveFit },
}

pub const MIN_POINTS: usize = 10;
const GRID_POINTS: usize = 500;
/// Grid range for `b + t_first`, in units of the window span.
const GRID_LO: f64 = 1e-6;
const GRID_HI: f64 = 1e4;
const MAX_ITERS: usize = 200;

/// Selects the points with `start * t_max <= t <= end * t_max`.
pub fn select_window(points: &[(f64, f64)], window: (f64, f64)) -> Result<Vec<(f64, f64)>, FitError> {
    let (lo, hi) = window;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(FitError::InvalidWindow(lo, hi));
    }
    let t_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(points
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo * t_max && *t <= hi * t_max)
        .collect())
}

/// Least-squares fit of `a / sqrt(t + b) + c` to the part of `points`
/// (step, loss) inside `window`, given as fractions of the largest step.
///
/// A log-spaced grid over `b` with `(a, c)` solved exactly at each node picks
/// the starting point; Gauss-Newton on all three parameters refines it.
pub fn fit_inverse_sqrt(points: &[(f64, f64)], window: (f64, f64)) -> Result<CurveFit, FitError> {
    let data = select_window(points, window)?;
    if data.len() < MIN_POINTS {
        return Err(FitError::InsufficientData {
            got: data.len(),
            need: MIN_POINTS,
        });
    }
    if let Some(&(step, value)) = data.iter().find(|(t, v)| !(v.is_finite() && *v > 0.0 && t.is_finite())) {
        return Err(FitError::InvalidLoss { step, value });
    }
    let t_first = data.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let t_last = data.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(&data, (t_first, t_last));

    let v0 = data[0].1;
    if data.iter().all(|p| p.1 == v0) {
        return Ok(frame.finish(0.0, 0.0, v0));
    }

    let span = (t_last - t_first).max(1.0);
    let (ln_lo, ln_hi) = (libm::log(GRID_LO * span), libm::log(GRID_HI * span));
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 0..GRID_POINTS {
        let s = libm::exp(ln_lo + (ln_hi - ln_lo) * k as f64 / (GRID_POINTS - 1) as f64);
        let b = s - t_first;
        if let Some((a, c)) = frame.linear_solve(b) {
            let sse = frame.sse(a, b, c);
            if best.is_none_or(|x| sse < x.3) {
                best = Some((a, b, c, sse));
            }
        }
    }
    let (a0, b0, c0, sse0) = best.expect("grid holds at least one solvable node");
    let grid_fit = frame.finish(a0, b0, c0);

    let (mut a, mut b, mut c, mut sse) = (a0, b0, c0, sse0);
    for _ in 0..MAX_ITERS {
        let Some(step) = frame.gauss_newton_step(a, b, c) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = false;
        while scale > 1e-10 {
            let (na, nb, nc) = (a + scale * step[0], b + scale * step[1], c + scale * step[2]);
            if nb + t_first > 0.0 {
                let nsse = frame.sse(na, nb, nc);
                if nsse < sse {
                    (a, b, c) = (na, nb, nc);
                    accepted = sse - nsse > 1e-15 * sse;
                    sse = nsse;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let s = b + t_first;
    if !(a.is_finite() && c.is_finite() && s > 0.0 && s <= GRID_HI * span) {
        return Err(FitError::FitDiverged { grid_fit });
    }
    Ok(frame.finish(a, b, c))
}

/// Fitted model evaluated past the window, plus the asymptote.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub points: Vec<(f64, f64)>,
    pub f_star_estimate: f64,
}

/// Evaluates `fit` at every integer step from the window end up to `horizon`.
pub fn extrapolate(fit: &CurveFit, horizon: f64) -> Extrapolation {
    let start = libm::ceil(fit.window.1);
    let mut points = Vec::new();
    let mut t = start;
    while t <= horizon {
        points.push((t, fit.predict(t)));
        t += 1.0;
    }
    Extrapolation {
        points,
        f_star_estimate: fit.c,
    }
}

/// Non-overlapping means of `k` consecutive points, each placed at its mean
/// step. A trailing partial block is dropped; `k <= 1` returns the input.
pub fn block_means(points: &[(f64, f64)], k: usize) -> Vec<(f64, f64)> {
    if k <= 1 {
        return points.to_vec();
    }
    let n = k as f64;
    points
        .chunks_exact(k)
        .map(|c| {
            let (t, v) = c.iter().fold((0.0, 0.0), |(t, v), p| (t + p.0, v + p.1));
            (t / n, v / n)
        })
        .collect()
}

/// Largest `|predicted - actual| / |actual|` over points with step `>= from`;
/// `None` when no point qualifies.
pub fn max_relative_error(fit: &CurveFit, points: &[(f64, f64)], from: f64) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.0 >= from)
        .map(|&(t, y)| libm::fabs((fit.predict(t) - y) / y))
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))))
}

struct Frame<'a> {
    data: &'a [(f64, f64)],
    window: (f64, f64),
    mean: f64,
    sst: f64,
}

impl<'a> Frame<'a> {
    fn new(data: &'a [(f64, f64)], window: (f64, f64)) -> Self {
        let n = data.len() as f64;
        let mean = data.iter().map(|p| p.1).sum::<f64>() / n;
        let sst = data.iter().map(|p| (p.1 - mean) * (p.1 - mean)).sum();
        Self {
            data,
            window,
            mean,
            sst,
        }
    }

    fn sse(&self, a: f64, b: f64, c: f64) -> f64 {
        self.data
            .iter()
            .map(|(t, y)| {
                let r = a / libm::sqrt(t + b) + c - y;
                r * r
            })
            .sum()
    }

    /// Optimal `(a, c)` for fixed `b`, by centered simple regression on
    /// `phi = 1 / sqrt(t + b)`.
    fn linear_solve(&self, b: f64) -> Option<(f64, f64)> {
        let n = self.data.len() as f64;
        let phi_mean = self.data.iter().map(|(t, _)| 1.0 / libm::sqrt(t + b)).sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (t, y) in self.data {
            let dx = 1.0 / libm::sqrt(t + b) - phi_mean;
            sxx += dx * dx;
            sxy += dx * (y - self.mean);
        }
        if !(sxx > 0.0) {
            return None;
        }
        let a = sxy / sxx;
        Some((a, self.mean - a * phi_mean))
    }

    /// Gauss-Newton direction with Jacobian columns scaled to unit norm.
    fn gauss_newton_step(&self, a: f64, b: f64, c: f64) -> Option<[f64; 3]> {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (t, y) in self.data {
            let phi = 1.0 / libm::sqrt(t + b);
            let r = a * phi + c - y;
            let j = [phi, -0.5 * a * phi * phi * phi, 1.0];
            for p in 0..3 {
                jtr[p] += j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let scale: [f64; 3] = core::array::from_fn(|p| {
            let d = libm::sqrt(jtj[p][p]);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        });
        let mut m = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for p in 0..3 {
            rhs[p] = -jtr[p] * scale[p];
            for q in 0..3 {
                m[p][q] = jtj[p][q] * scale[p] * scale[q];
            }
        }
        let x = solve3(m, rhs)?;
        let step = [x[0] * scale[0], x[1] * scale[1], x[2] * scale[2]];
        step.iter().all(|v| v.is_finite()).then_some(step)
    }

    fn finish(&self, a: f64, b: f64, c: f64) -> CurveFit {
        let sse = if a == 0.0 {
            self.data.iter().map(|(_, y)| (y - c) * (y - c)).sum()
        } else {
            self.sse(a, b, c)
        };
        let n = self.data.len();
        CurveFit {
            a,
            b,
            c,
            rms_residual: libm::sqrt(sse / n as f64),
            r_squared: if self.sst > 0.0 { 1.0 - sse / self.sst } else { 1.0 },
            window: self.window,
            n_points: n,
        }
    }
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(a: f64, b: f64, c: f64, steps: impl Iterator<Item = u64>) -> Vec<(f64, f64)> {
        steps
            .map(|t| (t as f64, a / libm::sqrt(t as f64 + b) + c))
            .collect()
    }

    fn rel(x: f64, y: f64) -> f64 {
        ((x - y) / y).abs()
    }

    #[test]
    fn recovers_generator_constants() {
        for (a, b, c) in [(41.5, 3076.0, 1.88), (20.3, 377.0, 2.07)] {
            let data = model(a, b, c, (1..=20_000).step_by(10));
            let fit = fit_inverse_sqrt(&data, (0.25, 1.0)).unwrap();
            assert!(rel(fit.a, a) < 1e-3, "{fit:?}");
            assert!(rel(fit.b, b) < 1e-3, "{fit:?}");
            assert!(rel(fit.c, c) < 1e-3, "{fit:?}");
            assert!(fit.rms_residual <= 1e-8);
        }
    }

    #[test]
    fn constant_series_ties_to_flat_model() {
        let data: Vec<_> = (0..50).map(|t| (t as f64, 3.5)).collect();
        let fit = fit_inverse_sqrt(&data, (0.0, 1.0)).unwrap();
        assert_eq!((fit.a, fit.b, fit.c, fit.rms_residual), (0.0, 0.0, 3.5, 0.0));
        assert_eq!(fit.predict(1e9), 3.5);
    }

    #[test]
    fn shift_moves_b() {
        let data = model(20.3, 377.0, 2.07, (100..=5000).step_by(5));
        let shifted: Vec<_> = data.iter().map(|(t, y)| (t + 200.0, *y)).collect();
        let f0 = fit_inverse_sqrt(&data, (0.0, 1.0)).unwrap();
        let f1 = fit_inverse_sqrt(&shifted, (0.0, 1.0)).unwrap();
        assert!((f1.b - (f0.b - 200.0)).abs() < 1e-3 * f0.b);
        assert!(rel(f1.a, f0.a) < 1e-6 && rel(f1.c, f0.c) < 1e-6);
    }

    #[test]
    fn window_errors() {
        let data = model(1.0, 1.0, 1.0, 1..=100);
        assert_eq!(fit_inverse_sqrt(&data, (0.5, 0.5)), Err(FitError::InvalidWindow(0.5, 0.5)));
        assert_eq!(fit_inverse_sqrt(&data, (0.2, 1.5)), Err(FitError::InvalidWindow(0.2, 1.5)));
        assert_eq!(
            fit_inverse_sqrt(&data, (0.95, 0.99)),
            Err(FitError::InsufficientData { got: 5, need: 10 })
        );
        let mut bad = data.clone();
        bad[80].1 = -1.0;
        assert!(matches!(fit_inverse_sqrt(&bad, (0.0, 1.0)), Err(FitError::InvalidLoss { .. })));
    }

    #[test]
    fn extrapolation() {
        let data = model(20.3, 377.0, 2.07, (1..=1000).step_by(1));
        let fit = fit_inverse_sqrt(&data, (0.05, 0.15)).unwrap();
        let ex = extrapolate(&fit, 100_000.0);
        assert_eq!(ex.f_star_estimate, fit.c);
        assert!((ex.points[0].1 - fit.predict(fit.window.1)).abs() < 1e-12);
        assert!(ex.points.windows(2).all(|w| w[1].1 < w[0].1));
        assert!((fit.predict(1e12) - 2.07).abs() < 1e-4);
        let t = 1e6;
        let ratio = (fit.predict(2.0 * t) - fit.c) / (fit.predict(t) - fit.c);
        assert!((ratio - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        let same = extrapolate(&fit, fit.window.1);
        assert_eq!(same.points.len(), 1);
    }

    #[test]
    fn block_means_average_steps_and_values() {
        let pts: Vec<(f64, f64)> = (1..=7).map(|t| (t as f64, 2.0 * t as f64)).collect();
        assert_eq!(block_means(&pts, 3), alloc::vec![(2.0, 4.0), (5.0, 10.0)]);
        assert_eq!(block_means(&pts, 1), pts);
    }

    #[test]
    fn relative_error_of_exact_model_is_zero() {
        let pts = model(20.3, 377.0, 2.07, (1..=2000).map(|t| t * 10));
        let fit = fit_inverse_sqrt(&pts, (0.05, 0.15)).unwrap();
        assert!(max_relative_error(&fit, &pts, 10_000.0).unwrap() < 1e-6);
        assert_eq!(max_relative_error(&fit, &pts, 1e9), None);
    }
}
