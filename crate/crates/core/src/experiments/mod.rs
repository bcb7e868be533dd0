//! Replicated studies: adaptive-lag accuracy and cost on the linear Gaussian
//! model, agreement with a long-run reference on stochastic volatility, and
//! the fixed-lag versus adaptive-lag comparison at a single marginal.
//!
//! Each study simulates one dataset from `data_seed`; replicate r draws its
//! particles from the stream `derive_seed(seed, r)`, shared across the
//! tolerance and lag grids. Replicates run on the rayon pool and are
//! collected in replicate order, so reports do not depend on scheduling.

pub mod config;
pub mod reference;
pub mod report;
pub mod studies;

pub use config::{ExperimentConfig, ModelKind, Study};
pub use reference::{gaussian_expectation, sv_reference, McReference};
pub use report::{efficiency, MarginalSummary, MethodReport, Report};
pub use studies::{run_fixed_vs_adaptive, run_lgssm_experiment, run_study, run_sv_experiment, simulate_data};
