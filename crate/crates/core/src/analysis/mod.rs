//! Post-hoc analysis of run logs.

mod fit;
mod norms;

pub use fit::{
    block_means, extrapolate, fit_inverse_sqrt, max_relative_error, select_window, CurveFit, Extrapolation, FitError,
    MIN_POINTS,
};
pub use norms::{block_ratio, norm_diagnostics, NormSet, WindowSummary};
