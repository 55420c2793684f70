//! Library side of the `fit`, `predict` and `bound` subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sfplus_core::analysis::{block_means, fit_inverse_sqrt, max_relative_error, CurveFit};
use sfplus_core::baselines::{BoundEvaluator, BoundInput, Schedule};

use crate::error::{HarnessError, Result};
use crate::runlog::LogTable;

/// Window used by `fit` when none is given: the last 75% of the run.
pub const FIT_WINDOW: (f64, f64) = (0.25, 1.0);
/// Window used by `predict` when none is given.
pub const PREDICT_WINDOW: (f64, f64) = (0.05, 0.15);

#[derive(Debug, Clone, PartialEq)]
pub struct FitRequest {
    pub column: String,
    pub window: (f64, f64),
    /// Last step to predict; `None` fits without a prediction curve.
    pub horizon: Option<f64>,
    /// Block size of the non-overlapping moving average applied first.
    pub smooth: usize,
}

impl Default for FitRequest {
    fn default() -> Self {
        Self {
            column: "loss_at_x".into(),
            window: FIT_WINDOW,
            horizon: None,
            smooth: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub column: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// First and last fitted step.
    pub window: [f64; 2],
    pub window_fraction: [f64; 2],
    pub rms_residual: f64,
    pub r_squared: f64,
    pub f_star_estimate: f64,
    pub n_points: usize,
    pub smooth: usize,
    pub horizon: Option<f64>,
    /// Worst relative error of the prediction over the second half of the
    /// logged steps; only with a horizon.
    pub max_rel_error_second_half: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub step: f64,
    pub predicted: f64,
    pub actual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub fit: CurveFit,
    pub report: FitReport,
    pub prediction: Vec<PredictionRow>,
}

/// Fits one column of a loaded log.
pub fn fit_table(table: &LogTable, req: &FitRequest) -> Result<FitOutput> {
    let points = block_means(&table.series(&req.column)?, req.smooth);
    fit_points(&points, req)
}

/// Fits a `(step, value)` series already in memory.
pub fn fit_points(points: &[(f64, f64)], req: &FitRequest) -> Result<FitOutput> {
    if req.smooth == 0 {
        return Err(HarnessError::ConfigInvalid("--smooth: must be positive".into()));
    }
    let fit = fit_inverse_sqrt(points, req.window)?;
    let last = points.last().map_or(0.0, |p| p.0);
    let mut prediction = Vec::new();
    let mut max_err = None;
    if let Some(horizon) = req.horizon {
        if !(horizon > fit.window.1) {
            return Err(HarnessError::ConfigInvalid(format!(
                "--horizon: {horizon} must lie past the fit window end {}",
                fit.window.1
            )));
        }
        prediction.extend(
            points
                .iter()
                .filter(|p| p.0 > fit.window.1 && p.0 <= horizon)
                .map(|&(step, y)| PredictionRow {
                    step,
                    predicted: fit.predict(step),
                    actual: Some(y),
                }),
        );
        if horizon > last {
            let cadence = if points.len() > 1 {
                (last - points[0].0) / (points.len() - 1) as f64
            } else {
                1.0
            };
            let mut t = last.max(fit.window.1) + cadence.max(1.0);
            while t < horizon {
                prediction.push(PredictionRow {
                    step: t,
                    predicted: fit.predict(t),
                    actual: None,
                });
                t += cadence.max(1.0);
            }
            prediction.push(PredictionRow {
                step: horizon,
                predicted: fit.predict(horizon),
                actual: None,
            });
        }
        max_err = max_relative_error(&fit, points, 0.5 * last);
    }
    let report = FitReport {
        column: req.column.clone(),
        a: fit.a,
        b: fit.b,
        c: fit.c,
        window: [fit.window.0, fit.window.1],
        window_fraction: [req.window.0, req.window.1],
        rms_residual: fit.rms_residual,
        r_squared: fit.r_squared,
        f_star_estimate: fit.f_star_estimate(),
        n_points: fit.n_points,
        smooth: req.smooth,
        horizon: req.horizon,
        max_rel_error_second_half: max_err,
    };
    Ok(FitOutput {
        fit,
        report,
        prediction,
    })
}

/// Reads `log`, fits, and writes `<stem>.fit.json` (plus
/// `<stem>.prediction.csv` with a horizon) into `out_dir`.
pub fn fit_log(log: &Path, req: &FitRequest, out_dir: &Path) -> Result<(FitOutput, Vec<PathBuf>)> {
    let out = fit_table(&LogTable::read(log)?, req)?;
    std::fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let stem = log.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
    let report_path = out_dir.join(format!("{stem}.fit.json"));
    let mut text = serde_json::to_string_pretty(&out.report).expect("report serializes");
    text.push('\n');
    std::fs::write(&report_path, text).map_err(HarnessError::io(&report_path))?;
    let mut written = vec![report_path];
    if req.horizon.is_some() {
        let path = out_dir.join(format!("{stem}.prediction.csv"));
        let file = File::create(&path).map_err(HarnessError::io(&path))?;
        write_prediction(&out.prediction, BufWriter::new(file)).map_err(HarnessError::io(&path))?;
        written.push(path);
    }
    Ok((out, written))
}

pub fn write_prediction(rows: &[PredictionRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "step,predicted,actual")?;
    for r in rows {
        match r.actual {
            Some(a) => writeln!(out, "{},{:.16e},{:.16e}", r.step, r.predicted, a)?,
            None => writeln!(out, "{},{:.16e},", r.step, r.predicted)?,
        }
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub step: u64,
    pub multiplier: f64,
    pub bound: f64,
}

/// Per-step convex bound for `schedule` with flat gradient norm `grad_norm`
/// and initial distance `distance`.
pub fn bound_curve(schedule: &Schedule, distance: f64, grad_norm: f64) -> Result<Vec<BoundRow>> {
    schedule.validate()?;
    let multipliers = schedule.multipliers();
    let input = BoundInput::flat(multipliers.clone(), schedule.peak, distance, grad_norm);
    input.validate()?;
    let curve = BoundEvaluator::new(&input).curve();
    Ok(multipliers
        .into_iter()
        .zip(curve)
        .enumerate()
        .map(|(i, (multiplier, bound))| BoundRow {
            step: i as u64 + 1,
            multiplier,
            bound,
        })
        .collect())
}

pub fn write_bound(rows: &[BoundRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "step,multiplier,bound")?;
    for r in rows {
        writeln!(out, "{},{:.16e},{:.16e}", r.step, r.multiplier, r.bound)?;
    }
    out.flush()
}
