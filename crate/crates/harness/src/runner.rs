//! The seeded training loop: gradient at the query point, exact loss at the
//! averaged point.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use sfplus_core::analysis::block_ratio;
use sfplus_core::params::l2_norm;
use sfplus_core::problems::{mix_seed, ProblemError};
use sfplus_core::{StepDiagnostics, StepError};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::runlog::{LogWriter, RunLogRecord, RunSummary};

/// Everything a run produced, kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RunLogRecord>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub summary: RunSummary,
    pub final_x: Vec<f64>,
    pub final_z: Vec<f64>,
    pub final_direction: Vec<f64>,
    pub scale_invariant_blocks: Vec<std::ops::Range<usize>>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub normalize_wallclock: bool,
}

/// Runs `cfg` without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    execute_with(cfg, |_| Ok(()))
}

/// Runs `cfg`, writing `<name>.csv` and `<name>.summary.json` into `out_dir`.
pub fn run_to_dir(cfg: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let csv_path = out_dir.join(format!("{}.csv", cfg.run.name));
    let file = File::create(&csv_path).map_err(HarnessError::io(&csv_path))?;
    let mut writer =
        LogWriter::new(BufWriter::new(file), opts.normalize_wallclock).map_err(HarnessError::io(&csv_path))?;
    let outcome = execute_with(cfg, |r| {
        writer.write(r)?;
        writer.flush()
    })
    .map_err(|e| match e {
        HarnessError::Io { source, .. } => HarnessError::Io {
            path: csv_path.clone(),
            source,
        },
        other => other,
    })?;
    writer.flush().map_err(HarnessError::io(&csv_path))?;
    write_summary(&outcome.summary, &summary_path(out_dir, &cfg.run.name))?;
    Ok(outcome)
}

pub fn summary_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.summary.json"))
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(HarnessError::io(path))
}

fn execute_with(cfg: &RunConfig, mut sink: impl FnMut(&RunLogRecord) -> std::io::Result<()>) -> Result<RunOutcome> {
    cfg.validate()?;
    let problem = cfg.problem.build();
    let theta0 = problem.initial_point(cfg.run.seed);
    let mut opt = cfg.build_optimizer(problem.as_ref(), theta0)?;
    let run = &cfg.run;

    let start = Instant::now();
    let initial_loss = problem.loss(opt.model_point());
    let mut loss_x = initial_loss;
    let mut min_loss_x = initial_loss;
    let mut records = Vec::new();
    let mut diagnostics = Vec::with_capacity(run.total_steps.min(1 << 20) as usize);
    let mut failure: Option<(u64, String)> = None;
    let mut last_loss_y = f64::NAN;

    for step in 1..=run.total_steps {
        let sample = match problem.oracle(opt.query_point(), mix_seed(run.seed, step), run.batch_size) {
            Ok(s) => s,
            Err(e @ (ProblemError::BatchTooLarge { .. } | ProblemError::EmptyBatch)) => {
                return Err(HarnessError::ConfigInvalid(format!("run.batch_size: {e}")))
            }
            Err(e) => return Err(HarnessError::ConfigInvalid(e.to_string())),
        };
        last_loss_y = sample.loss;
        if !sample.loss.is_finite() {
            failure = Some((step, format!("non-finite loss at the query point (step {step})")));
            break;
        }
        let d = match opt.step(&sample.grad, sample.loss) {
            Ok(d) => d,
            Err(e @ (StepError::NonFiniteGradient { .. } | StepError::NonFiniteParameter { .. })) => {
                failure = Some((step, e.to_string()));
                break;
            }
            Err(e) => return Err(HarnessError::ConfigInvalid(e.to_string())),
        };
        diagnostics.push(d);

        let last = step == run.total_steps;
        if step % run.eval_every == 0 || last {
            loss_x = problem.loss(opt.model_point());
            if !loss_x.is_finite() {
                failure = Some((step, format!("non-finite loss at the averaged point (step {step})")));
            }
            min_loss_x = min_loss_x.min(loss_x);
        }
        if step % run.log_every == 0 || last || failure.is_some() {
            let record = RunLogRecord {
                step,
                loss_at_x: loss_x,
                loss_at_y: sample.loss,
                grad_l1: d.l1_norm,
                grad_l2: d.l2_norm,
                eta_t: d.eta,
                alpha_t: d.alpha,
                c_t: d.c,
                beta_tilde: d.beta_tilde,
                norm_x: d.norm_x,
                norm_y: d.norm_y,
                norm_z: d.norm_z,
                wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            sink(&record).map_err(HarnessError::io(run.name.as_str()))?;
            records.push(record);
        }
        if failure.is_some() {
            break;
        }
    }

    let blocks = problem.scale_invariant_blocks();
    let final_x = opt.model_point().to_vec();
    let final_z = opt.base_point().to_vec();
    let final_direction = opt.last_direction().to_vec();
    let z_norm = l2_norm(&final_z);
    let ratio = |num: f64| if z_norm > 0.0 { num / z_norm } else { f64::NAN };
    let terminal = diagnostics.last().copied().unwrap_or_default();
    let update_to_weight = if blocks.is_empty() {
        ratio(l2_norm(&final_direction))
    } else {
        block_ratio(&final_direction, &final_z, &blocks)
    };
    let summary = RunSummary {
        name: run.name.clone(),
        optimizer: format!("{:?}", cfg.optimizer.kind()).to_lowercase(),
        steps_completed: diagnostics.len() as u64,
        initial_loss,
        final_loss_x: loss_x,
        final_loss_y: last_loss_y,
        min_loss_x,
        diverged: failure.is_some(),
        diverged_at: failure.as_ref().map(|f| f.0),
        failure: failure.map(|f| f.1),
        terminal_grad_to_weight: ratio(terminal.l2_norm),
        terminal_update_to_weight: update_to_weight,
        terminal_x_to_z: ratio(l2_norm(&final_x)),
    };
    Ok(RunOutcome {
        records,
        diagnostics,
        summary,
        final_x,
        final_z,
        final_direction,
        scale_invariant_blocks: blocks,
    })
}

/// Loss of the problem in `cfg` at an arbitrary point, for callers that
/// post-process a run.
pub fn problem_loss(cfg: &RunConfig, params: &[f64]) -> f64 {
    cfg.problem.build().loss(params)
}

/// Convenience for tests and tools: writes a log into memory.
pub fn log_bytes(outcome: &RunOutcome, normalize_wallclock: bool) -> Vec<u8> {
    let mut buf = Vec::new();
    crate::runlog::write_log(&outcome.records, normalize_wallclock, &mut buf).expect("writing to memory");
    buf.flush().expect("flushing memory");
    buf
}
