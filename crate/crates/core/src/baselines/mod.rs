//! Baseline optimizers and schedules, plus evaluators for the convex bounds
//! that motivate them.

mod adam;
mod bounds;
mod schedule;

pub use adam::{adam_step, AdamBaseline, AdamConfig, AdamState, DecayMode};
pub use bounds::{
    anytime_bound, optimal_step_sizes, optimal_weights, weighted_regret_objective, BoundEvaluator,
    BoundInput,
};
pub use schedule::{Schedule, ScheduleKind};
