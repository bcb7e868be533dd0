//! Marginal smoothers built on a running bootstrap filter.
//!
//! [`adaptive`] holds the adaptive-lag smoother, whose per-marginal
//! statistics are refreshed with backward-sampled averages and retired once
//! their weighted variance drops below a tolerance. [`backward`] provides the
//! backward sampling and the exact quadratic-cost update used to check it, and
//! [`fixed_lag`] the genealogy-based fixed-lag baseline.

pub mod adaptive;
pub mod backward;
pub mod fixed_lag;

pub use adaptive::{
    adaptive_lag_step, run_adaptive_lag, AdaptiveLagSmoother, AdaptiveRun, EstimatorBank, SmootherConfig,
};
pub use backward::{
    average_selected, backward_index, draw_backward_indices, ffbsm_update, paris_update, variance_criterion,
};
pub use fixed_lag::{fixed_lag_run, fixed_lag_runs};
