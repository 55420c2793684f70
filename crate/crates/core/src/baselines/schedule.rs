//! Learning-rate schedules: constant, linear decay, warmup-stable-decay, cosine.

use crate::sf::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    LinearDecay,
    /// Warmup, constant, then a linear anneal to zero over the final
    /// `anneal_fraction` of the run.
    Wsd,
    /// Half-cosine from the peak down to `peak * min_ratio`.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub peak: f64,
    pub anneal_fraction: f64,
    pub min_ratio: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, total_steps: u64, warmup_steps: u64, peak: f64) -> Self {
        Self {
            kind,
            total_steps,
            warmup_steps,
            peak,
            anneal_fraction: 0.1,
            min_ratio: 0.1,
        }
    }

    pub fn constant(peak: f64) -> Self {
        Self::new(ScheduleKind::Constant, u64::MAX, 0, peak)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.peak.is_finite() && self.peak > 0.0) {
            return Err(ConfigError::new("peak", "must be finite and positive"));
        }
        if self.total_steps == 0 {
            return Err(ConfigError::new("total_steps", "must be positive"));
        }
        if self.warmup_steps > self.total_steps {
            return Err(ConfigError::new("warmup_steps", "must not exceed total_steps"));
        }
        if !(0.0..=1.0).contains(&self.anneal_fraction) {
            return Err(ConfigError::new("anneal_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.min_ratio) {
            return Err(ConfigError::new("min_ratio", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Number of steps in the WSD anneal phase.
    pub fn anneal_steps(&self) -> u64 {
        let decay_span = self.total_steps - self.warmup_steps;
        let steps = libm::round(self.anneal_fraction * self.total_steps as f64) as u64;
        steps.min(decay_span)
    }

    /// Learning rate at step `t` (1-based). Steps past the horizon hold the
    /// final value.
    pub fn value(&self, t: u64) -> f64 {
        let t = t.clamp(1, self.total_steps);
        if t <= self.warmup_steps {
            return self.peak * t as f64 / self.warmup_steps as f64;
        }
        let after = (t - self.warmup_steps) as f64;
        let span = (self.total_steps - self.warmup_steps) as f64;
        match self.kind {
            ScheduleKind::Constant => self.peak,
            ScheduleKind::LinearDecay => self.peak * (1.0 - after / span),
            ScheduleKind::Wsd => {
                let anneal = self.anneal_steps();
                let start = self.total_steps - anneal;
                if t <= start {
                    self.peak
                } else {
                    self.peak * (self.total_steps - t) as f64 / anneal as f64
                }
            }
            ScheduleKind::Cosine => {
                let progress = after / span;
                let cos = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
                self.peak * (self.min_ratio + (1.0 - self.min_ratio) * cos)
            }
        }
    }

    /// `value(t) / peak` for `t = 1..=total_steps`.
    pub fn multipliers(&self) -> alloc::vec::Vec<f64> {
        (1..=self.total_steps).map(|t| self.value(t) / self.peak).collect()
    }
}
