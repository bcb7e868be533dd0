//! Bootstrap particle filter and genealogy-based estimators.
//!
//! Resampling is multinomial at every step. All weighted sums run in
//! ascending index order with naive accumulation, so a run is bit-reproducible
//! from its seed.

mod bootstrap;
mod categorical;
mod genealogy;
mod sample;

pub use bootstrap::{bootstrap_init, bootstrap_step, run_filter};
pub use categorical::{categorical_draw, Categorical};
pub use genealogy::{poor_mans_estimate, unique_ancestors, GenealogyStore, OriginTracker};
pub use sample::{filter_estimate, WeightedSample};

pub(crate) use sample::weighted_mean;
