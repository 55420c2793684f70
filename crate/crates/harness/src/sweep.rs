//! Grid sweeps: a base config, a cartesian `[grid]` of overrides and optional
//! named `[[extra]]` runs, executed shared-nothing on a rayon pool.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use toml::{Table, Value};

use crate::config::{parse_table, resolve, RunConfig};
use crate::error::{HarnessError, Result};
use crate::runlog::RunSummary;
use crate::runner::{execute, run_to_dir, RunOptions};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    #[serde(default = "default_sweep_name")]
    name: String,
    base: Table,
    #[serde(default)]
    grid: Table,
    #[serde(default)]
    extra: Vec<ExtraRun>,
}

fn default_sweep_name() -> String {
    "sweep".into()
}

/// A run outside the grid: the base config plus its own overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraRun {
    pub name: String,
    #[serde(default)]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub base: Table,
    /// Dotted key and its values, in key order.
    pub grid: Vec<(String, Vec<Value>)>,
    pub extra: Vec<ExtraRun>,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SweepFile = Value::Table(parse_table(text)?)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::ConfigInvalid(format!("sweep: {}", e.message())))?;
        let grid = file
            .grid
            .into_iter()
            .map(|(k, v)| match v {
                Value::Array(vals) if !vals.is_empty() => Ok((k, vals)),
                _ => Err(HarnessError::ConfigInvalid(format!(
                    "grid.{k}: must be a non-empty array"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: file.name,
            base: file.base,
            grid,
            extra: file.extra,
        })
    }

    /// One config per grid point followed by the extras. `overrides` apply to
    /// the base before the grid values.
    pub fn expand(&self, overrides: &[String]) -> Result<Vec<RunConfig>> {
        let base = resolve(self.base.clone(), overrides)?;
        let base_name = base
            .get("run")
            .and_then(|r| r.get("name"))
            .and_then(Value::as_str)
            .unwrap_or(&self.name)
            .to_string();
        let mut out = Vec::new();
        for point in cartesian(&self.grid) {
            let sets: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let label: Vec<String> = point.iter().map(|(k, v)| format!("{}={}", leaf(k), plain(v))).collect();
            let mut s = sets;
            s.push(format!("run.name=\"{}\"", run_name(&base_name, &label.join("_"))));
            out.push(RunConfig::from_table(resolve(base.clone(), &s)?)?);
        }
        for extra in &self.extra {
            let mut s = extra.set.clone();
            s.push(format!("run.name=\"{}\"", run_name(&base_name, &extra.name)));
            out.push(RunConfig::from_table(resolve(base.clone(), &s)?)?);
        }
        if out.is_empty() {
            return Err(HarnessError::ConfigInvalid("sweep: no runs".into()));
        }
        Ok(out)
    }
}

fn cartesian(grid: &[(String, Vec<Value>)]) -> Vec<Vec<(String, Value)>> {
    grid.iter().fold(vec![Vec::new()], |acc, (key, vals)| {
        acc.into_iter()
            .flat_map(|prefix| {
                vals.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((key.clone(), v.clone()));
                    p
                })
            })
            .collect()
    })
}

fn leaf(key: &str) -> &str {
    key.rsplit('.').next().unwrap_or(key)
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn run_name(base: &str, suffix: &str) -> String {
    let clean: String = suffix
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_' | '=') { c } else { '-' })
        .collect();
    format!("{base}-{clean}")
}

/// One line of the sweep table. `error` is set when the run could not start
/// or write its outputs; diverged runs carry their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub name: String,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

impl SweepRow {
    fn rank_key(&self) -> (u8, f64) {
        match &self.summary {
            Some(s) if !s.diverged && s.final_loss_x.is_finite() => (0, s.final_loss_x),
            Some(_) => (1, 0.0),
            None => (2, 0.0),
        }
    }
}

/// Runs every config on a pool of `parallelism` threads and returns the rows
/// ranked by final loss at the averaged point; diverged and failed runs last.
/// With `out_dir` each run writes its own log and summary.
pub fn run_sweep(
    configs: &[RunConfig],
    parallelism: usize,
    out_dir: Option<&Path>,
    opts: &RunOptions,
) -> Result<Vec<SweepRow>> {
    if configs.is_empty() {
        return Err(HarnessError::ConfigInvalid("sweep: no runs".into()));
    }
    if parallelism == 0 {
        return Err(HarnessError::ConfigInvalid("--parallelism: must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::ConfigInvalid(format!("--parallelism: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let result = match out_dir {
                    Some(dir) => run_to_dir(cfg, dir, opts),
                    None => execute(cfg),
                };
                match result {
                    Ok(o) => SweepRow {
                        name: cfg.run.name.clone(),
                        summary: Some(o.summary),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        name: cfg.run.name.clone(),
                        summary: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    rows.sort_by(|a, b| {
        let (ka, kb) = (a.rank_key(), b.rank_key());
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.name.cmp(&b.name))
    });
    Ok(rows)
}

/// Writes the ranked table as CSV.
pub fn write_table(rows: &[SweepRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "rank,name,status,final_loss_x,min_loss_x,steps_completed")?;
    for (i, r) in rows.iter().enumerate() {
        match (&r.summary, &r.error) {
            (Some(s), _) => writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{}",
                i + 1,
                r.name,
                if s.diverged { "diverged" } else { "ok" },
                s.final_loss_x,
                s.min_loss_x,
                s.steps_completed
            )?,
            (None, err) => writeln!(
                out,
                "{},{},error: {},,,0",
                i + 1,
                r.name,
                err.as_deref().unwrap_or("").replace([',', '\n'], ";")
            )?,
        }
    }
    Ok(())
}
