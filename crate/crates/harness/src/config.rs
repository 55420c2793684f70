//! Run configuration: TOML files, presets and dotted `key=value` overrides.

use serde::{Deserialize, Serialize};
use sfplus_core::baselines::{AdamBaseline, AdamConfig, DecayMode, Schedule, ScheduleKind};
use sfplus_core::problems::{LogisticSynthetic, NonsmoothValley, NormalizedMlp, Problem, Quadratic};
use sfplus_core::sf::DecayCoupling;
use sfplus_core::{HyperConfig, Optimizer, ParamVector, ScheduleFreePlus, StepRule};
use toml::{Table, Value};

use crate::error::{HarnessError, Result};
use crate::presets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub run: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        dim: usize,
        condition_number: f64,
        #[serde(default)]
        noise_std: f64,
    },
    NonsmoothValley {
        dim: usize,
        #[serde(default)]
        noise_std: f64,
    },
    LogisticSynthetic {
        dim: usize,
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
    NormalizedMlp {
        width: usize,
        depth: usize,
        #[serde(default = "default_input_dim")]
        input_dim: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_input_dim() -> usize {
    sfplus_core::problems::DEFAULT_INPUT_DIM
}

fn default_samples() -> usize {
    sfplus_core::problems::DEFAULT_SAMPLES
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sfplus,
    Sf,
    Adamw,
    Adamc,
    AdamcFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleKind {
    Polyak,
    Fixed,
    InverseL1,
}

/// Optimizer section. Unset fields take the defaults of `kind`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: Option<OptimizerKind>,
    pub step_rule: Option<StepRuleKind>,
    pub lr: Option<f64>,
    pub warmup_steps: Option<u64>,
    pub weight_decay: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub c_warmup: Option<u64>,
    pub sf_beta: Option<f64>,
    pub sf_beta_max: Option<f64>,
    pub anneal_steps: Option<u64>,
    pub polyak_ema: Option<f64>,
    pub f_star: Option<f64>,
    pub numerator_ema: Option<f64>,
    pub refinement_c: Option<f64>,
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKindSpec {
    #[default]
    Constant,
    LinearDecay,
    Wsd,
    Cosine,
}

impl From<ScheduleKindSpec> for ScheduleKind {
    fn from(k: ScheduleKindSpec) -> Self {
        match k {
            ScheduleKindSpec::Constant => ScheduleKind::Constant,
            ScheduleKindSpec::LinearDecay => ScheduleKind::LinearDecay,
            ScheduleKindSpec::Wsd => ScheduleKind::Wsd,
            ScheduleKindSpec::Cosine => ScheduleKind::Cosine,
        }
    }
}

/// Learning-rate schedule of the Adam baselines; ignored by the schedule-free kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub kind: ScheduleKindSpec,
    #[serde(default = "default_anneal_fraction")]
    pub anneal_fraction: f64,
    #[serde(default = "default_min_ratio")]
    pub min_ratio: f64,
}

fn default_anneal_fraction() -> f64 {
    0.1
}

fn default_min_ratio() -> f64 {
    0.1
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            kind: ScheduleKindSpec::Constant,
            anneal_fraction: default_anneal_fraction(),
            min_ratio: default_min_ratio(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub total_steps: u64,
    #[serde(default = "one")]
    pub batch_size: usize,
    /// Logged row cadence; the log is flushed after every row.
    #[serde(default = "ten")]
    pub log_every: u64,
    /// Cadence of the exact loss evaluation at the averaged point.
    #[serde(default = "ten")]
    pub eval_every: u64,
    #[serde(default)]
    pub seed: u64,
    /// File stem of the log and summary inside the output directory.
    #[serde(default = "default_name")]
    pub name: String,
}

fn one() -> usize {
    1
}

fn ten() -> u64 {
    10
}

fn default_name() -> String {
    "run".into()
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::ConfigInvalid(msg.into())
}

impl ProblemSpec {
    pub fn build(&self) -> Box<dyn Problem> {
        match *self {
            Self::Quadratic {
                dim,
                condition_number,
                noise_std,
            } => Box::new(Quadratic::new(dim, condition_number, noise_std)),
            Self::NonsmoothValley { dim, noise_std } => Box::new(NonsmoothValley::with_noise(dim, noise_std)),
            Self::LogisticSynthetic { dim, samples, seed } => Box::new(LogisticSynthetic::new(dim, samples, seed)),
            Self::NormalizedMlp {
                width,
                depth,
                input_dim,
                samples,
                seed,
            } => Box::new(NormalizedMlp::with_data(input_dim, width, depth, samples, seed)),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(invalid(format!("problem.{field}: must be positive")))
            } else {
                Ok(())
            }
        };
        let noise = |v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid("problem.noise_std: must be finite and non-negative"))
            }
        };
        match *self {
            Self::Quadratic {
                dim,
                condition_number,
                noise_std,
            } => {
                positive("dim", dim)?;
                noise(noise_std)?;
                if !(condition_number >= 1.0 && condition_number.is_finite()) {
                    return Err(invalid("problem.condition_number: must be finite and >= 1"));
                }
            }
            Self::NonsmoothValley { dim, noise_std } => {
                positive("dim", dim)?;
                noise(noise_std)?;
            }
            Self::LogisticSynthetic { dim, samples, .. } => {
                positive("dim", dim)?;
                positive("samples", samples)?;
            }
            Self::NormalizedMlp {
                width,
                depth,
                input_dim,
                samples,
                ..
            } => {
                positive("width", width)?;
                positive("depth", depth)?;
                positive("input_dim", input_dim)?;
                positive("samples", samples)?;
            }
        }
        Ok(())
    }

    /// Number of data points a minibatch is drawn from, if finite.
    fn samples(&self) -> Option<usize> {
        match *self {
            Self::LogisticSynthetic { samples, .. } | Self::NormalizedMlp { samples, .. } => Some(samples),
            _ => None,
        }
    }
}

fn optimizer_field<T>(r: std::result::Result<T, sfplus_core::sf::ConfigError>) -> Result<T> {
    r.map_err(|e| invalid(format!("optimizer.{}: {}", e.field, e.reason)))
}

impl OptimizerSpec {
    pub fn kind(&self) -> OptimizerKind {
        self.kind.unwrap_or(OptimizerKind::Sfplus)
    }

    /// Hyper-parameters of the schedule-free kinds. `default_f_star` is used
    /// when `f_star` is unset.
    pub fn hyper_config(&self, default_f_star: f64) -> Result<HyperConfig> {
        let kind = self.kind();
        let mut cfg = match kind {
            OptimizerKind::Sfplus => HyperConfig::default(),
            OptimizerKind::Sf => HyperConfig::schedule_free(1.0),
            _ => return Err(invalid("optimizer.kind: not a schedule-free optimizer")),
        };
        let rule = self.step_rule.unwrap_or(match kind {
            OptimizerKind::Sf => StepRuleKind::Fixed,
            _ => StepRuleKind::Polyak,
        });
        let lr = || self.lr.ok_or_else(|| invalid("optimizer.lr: required by the fixed and inverse_l1 step rules"));
        cfg.step_rule = match rule {
            StepRuleKind::Polyak => StepRule::Polyak,
            StepRuleKind::Fixed => StepRule::Fixed { lr: lr()? },
            StepRuleKind::InverseL1 => StepRule::InverseL1 { lr: lr()? },
        };
        if kind == OptimizerKind::Sf {
            cfg.decay_coupling = DecayCoupling::Decoupled;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(warmup_steps, weight_decay, beta1, beta2, eps, r, p, c_warmup, sf_beta, anneal_steps, polyak_ema);
        cfg.sf_beta_max = self.sf_beta_max.unwrap_or(cfg.sf_beta);
        cfg.f_star = self.f_star.unwrap_or(default_f_star);
        cfg.numerator_ema = self.numerator_ema;
        cfg.refinement_c = self.refinement_c;
        cfg.clip_norm = self.clip_norm;
        optimizer_field(cfg.validate())?;
        Ok(cfg)
    }

    pub fn adam_config(&self) -> Result<AdamConfig> {
        let mode = match self.kind() {
            OptimizerKind::Adamw => DecayMode::AdamW,
            OptimizerKind::Adamc => DecayMode::AdamCCoupled,
            OptimizerKind::AdamcFull => DecayMode::AdamCFull,
            _ => return Err(invalid("optimizer.kind: not an Adam baseline")),
        };
        let d = AdamConfig::default();
        let cfg = AdamConfig {
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            eps: self.eps.unwrap_or(d.eps),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            mode,
            clip_norm: self.clip_norm,
        };
        optimizer_field(cfg.validate())?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Field-level checks that do not need the problem data.
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        let run = &self.run;
        if run.total_steps == 0 {
            return Err(invalid("run.total_steps: must be positive"));
        }
        if run.batch_size == 0 {
            return Err(invalid("run.batch_size: must be positive"));
        }
        if let Some(n) = self.problem.samples() {
            if run.batch_size > n {
                return Err(invalid(format!(
                    "run.batch_size: {} exceeds the {n} samples of the problem",
                    run.batch_size
                )));
            }
        }
        if run.log_every == 0 || run.eval_every == 0 {
            return Err(invalid("run.log_every and run.eval_every must be positive"));
        }
        if run.name.is_empty() || run.name.contains(['/', '\\']) {
            return Err(invalid("run.name: must be a non-empty file stem"));
        }
        if self.optimizer.warmup_steps.unwrap_or(0) > run.total_steps {
            return Err(invalid("optimizer.warmup_steps: must not exceed run.total_steps"));
        }
        match self.optimizer.kind() {
            OptimizerKind::Sfplus | OptimizerKind::Sf => {
                self.optimizer.hyper_config(0.0)?;
            }
            _ => {
                self.optimizer.adam_config()?;
                self.schedule(self.optimizer.lr.ok_or_else(|| invalid("optimizer.lr: required by Adam baselines"))?)
                    .validate()
                    .map_err(|e| invalid(format!("schedule.{}: {}", e.field, e.reason)))?;
            }
        }
        Ok(())
    }

    pub fn schedule(&self, peak: f64) -> Schedule {
        Schedule {
            anneal_fraction: self.schedule.anneal_fraction,
            min_ratio: self.schedule.min_ratio,
            ..Schedule::new(
                self.schedule.kind.into(),
                self.run.total_steps,
                self.optimizer.warmup_steps.unwrap_or(0),
                peak,
            )
        }
    }

    /// Builds the optimizer at `theta0`. Polyak falls back to the problem's
    /// optimal value (or 0) when `f_star` is unset.
    pub fn build_optimizer(&self, problem: &dyn Problem, theta0: Vec<f64>) -> Result<Box<dyn Optimizer + Send>> {
        let theta0 = ParamVector::from_vec(theta0);
        Ok(match self.optimizer.kind() {
            OptimizerKind::Sfplus | OptimizerKind::Sf => {
                let cfg = self.optimizer.hyper_config(problem.f_star().unwrap_or(0.0))?;
                Box::new(ScheduleFreePlus::new(cfg, theta0)?)
            }
            _ => {
                let cfg = self.optimizer.adam_config()?;
                let lr = self.optimizer.lr.ok_or_else(|| invalid("optimizer.lr: required by Adam baselines"))?;
                Box::new(AdamBaseline::new(cfg, self.schedule(lr), theta0)?)
            }
        })
    }

    pub fn from_table(table: Table) -> Result<Self> {
        let cfg: Self = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(resolve(parse_table(text)?, &[])?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| invalid(e.message().to_string()))
}

/// Expands a top-level `preset = "<name>"` key (the file's own keys win) and
/// applies `key=value` overrides.
pub fn resolve(mut table: Table, overrides: &[String]) -> Result<Table> {
    if let Some(name) = table.remove("preset") {
        let name = name.as_str().ok_or_else(|| invalid("preset: must be a string"))?;
        let text = presets::get(name).ok_or_else(|| invalid(format!("preset: unknown preset `{name}`")))?;
        let mut base = parse_table(text)?;
        merge(&mut base, table);
        table = base;
    }
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    Ok(table)
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies one `a.b.c=value` override. The value is read as a TOML value and
/// falls back to a bare string.
pub fn apply_override(table: &mut Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| invalid(format!("--set {item}: expected key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(invalid(format!("--set {item}: empty key segment")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("--set {item}: `{p}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
