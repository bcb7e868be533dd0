//! Online marginal smoothing for general state-space models.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: state-space model abstraction, the linear Gaussian and
//!   stochastic volatility instances, and trajectory simulation.
//! - [`kalman`]: exact filtering and smoothing for linear Gaussian models,
//!   including the exact adaptive-lag algorithm on affine objectives.
//! - [`particle`]: the bootstrap particle filter, categorical resampling,
//!   genealogy tracking and the poor man's smoother.
//! - [`smoothers`]: the adaptive-lag smoother built on backward-sampled
//!   statistics, the quadratic-cost forward-filtering backward-smoothing update
//!   used as an oracle, and the fixed-lag baseline.
//! - [`experiments`]: seeded, replicated studies and their report files.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod kalman;
pub mod marginal;
pub mod model;
pub mod objective;
pub mod particle;
pub mod rng;
pub mod smoothers;

pub use error::{Error, Result};
pub use marginal::SmoothedMarginal;
pub use model::{make_lgssm, make_sv, simulate, LgssmParams, ModelSpec, SvParams, Trajectory};
pub use objective::Objective;
