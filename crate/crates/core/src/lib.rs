//! ScheduleFree+ optimizer, baseline optimizers and schedules, synthetic
//! gradient-oracle problems, and loss-curve analysis.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is off.
//! File formats, the run loop and the CLI live in `sfplus-harness`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod baselines;
pub mod optimizer;
pub mod params;
pub mod problems;
pub mod sf;

pub use optimizer::{Optimizer, StepDiagnostics, StepError};
pub use params::ParamVector;
pub use sf::{sf_step, HyperConfig, ScheduleFreePlus, SfState, StepRule};
