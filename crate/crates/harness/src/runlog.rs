//! The run-log CSV schema and the run summary.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const HEADER: [&str; 13] = [
    "step",
    "loss_at_x",
    "loss_at_y",
    "grad_l1",
    "grad_l2",
    "eta_t",
    "alpha_t",
    "c_t",
    "beta_tilde",
    "norm_x",
    "norm_y",
    "norm_z",
    "wallclock_ms",
];

/// One logged row. `loss_at_x` is the exact objective at the averaged point as
/// of the most recent evaluation; `loss_at_y` is the minibatch loss the step
/// consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLogRecord {
    pub step: u64,
    pub loss_at_x: f64,
    pub loss_at_y: f64,
    pub grad_l1: f64,
    pub grad_l2: f64,
    pub eta_t: f64,
    pub alpha_t: f64,
    pub c_t: f64,
    pub beta_tilde: f64,
    pub norm_x: f64,
    pub norm_y: f64,
    pub norm_z: f64,
    pub wallclock_ms: f64,
}

impl RunLogRecord {
    fn values(&self) -> [f64; 11] {
        [
            self.loss_at_x,
            self.loss_at_y,
            self.grad_l1,
            self.grad_l2,
            self.eta_t,
            self.alpha_t,
            self.c_t,
            self.beta_tilde,
            self.norm_x,
            self.norm_y,
            self.norm_z,
        ]
    }
}

/// Streams rows in the frozen schema. Floats carry 17 significant digits.
pub struct LogWriter<W: Write> {
    out: W,
    normalize_wallclock: bool,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, normalize_wallclock: bool) -> std::io::Result<Self> {
        writeln!(out, "{}", HEADER.join(","))?;
        Ok(Self {
            out,
            normalize_wallclock,
        })
    }

    pub fn write(&mut self, r: &RunLogRecord) -> std::io::Result<()> {
        write!(self.out, "{}", r.step)?;
        for v in r.values() {
            write!(self.out, ",{v:.16e}")?;
        }
        let wall = if self.normalize_wallclock { 0.0 } else { r.wallclock_ms };
        writeln!(self.out, ",{wall:.3}")
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_log(records: &[RunLogRecord], normalize_wallclock: bool, out: impl Write) -> std::io::Result<()> {
    let mut w = LogWriter::new(out, normalize_wallclock)?;
    for r in records {
        w.write(r)?;
    }
    w.flush()
}

/// A log loaded column-wise, for analysis of arbitrary columns. Empty fields
/// read as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl LogTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(HarnessError::io(path))?;
        Self::from_reader(BufReader::new(file), path)
    }

    pub fn from_reader(input: impl Read, path: &Path) -> Result<Self> {
        let bad = |reason: String| HarnessError::BadLog {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::Reader::from_reader(input);
        let columns: Vec<String> = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = rec
                .iter()
                .map(|v| match v.trim() {
                    "" => Ok(f64::NAN),
                    v => v.parse::<f64>(),
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::MissingColumn(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// `(step, value)` pairs of one column.
    pub fn series(&self, name: &str) -> Result<Vec<(f64, f64)>> {
        Ok(self.column("step")?.into_iter().zip(self.column(name)?).collect())
    }
}

/// Rewrites the `wallclock_ms` column of a log to zero.
pub fn normalize_wallclock(input: impl BufRead, mut out: impl Write) -> std::io::Result<()> {
    let mut wall = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 {
            wall = line.split(',').position(|c| c == "wallclock_ms");
            writeln!(out, "{line}")?;
            continue;
        }
        match wall {
            Some(idx) => {
                let fields: Vec<&str> = line
                    .split(',')
                    .enumerate()
                    .map(|(k, f)| if k == idx { "0.000" } else { f })
                    .collect();
                writeln!(out, "{}", fields.join(","))?;
            }
            None => writeln!(out, "{line}")?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub optimizer: String,
    pub steps_completed: u64,
    pub initial_loss: f64,
    pub final_loss_x: f64,
    pub final_loss_y: f64,
    pub min_loss_x: f64,
    pub diverged: bool,
    pub diverged_at: Option<u64>,
    pub failure: Option<String>,
    /// `||g|| / ||z||` at the last step.
    pub terminal_grad_to_weight: f64,
    /// Mean over scale-invariant blocks (whole vector if none) of
    /// `||update direction|| / ||z||` at the last step.
    pub terminal_update_to_weight: f64,
    /// `||x|| / ||z||` at the last step.
    pub terminal_x_to_z: f64,
}
