//! State-space models.
//!
//! A model is a latent Markov chain X_t with initial law χ and transition
//! density q, observed through conditionally independent Y_t with density
//! g(x, y). [`StateSpaceModel`] describes the dynamics; [`ModelSpec`] binds a
//! model to an observation record so that g_t(x) = g(x, y_t) is defined.

mod lgssm;
mod sv;
mod trajectory;

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};

pub use lgssm::{make_lgssm, make_lgssm_for_simulation, LgssmParams, LinearGaussian};
pub use sv::{make_sv, StochasticVolatility, SvParams};
pub use trajectory::{format_value, read_observation_rows, simulate, ObservationRows, Trajectory};

/// Dynamics of a fully dominated state-space model.
///
/// States and observations are flat `f64` slices of length
/// [`state_dim`](Self::state_dim) and [`obs_dim`](Self::obs_dim). Densities are
/// returned in log space; samplers take the random stream explicitly so an
/// implementation holds no mutable state.
pub trait StateSpaceModel: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]);
    fn initial_log_density(&self, x: &[f64]) -> f64;

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);
    fn transition_log_density(&self, x: &[f64], x_next: &[f64]) -> f64;

    fn sample_observation(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);
    fn observation_log_density(&self, y: &[f64], x: &[f64]) -> f64;

    /// Uniform bound ε̄ ≥ q(x, x′), or `None` if the transition has no density
    /// (simulation-only models).
    fn transition_density_bound(&self) -> Option<f64>;
}

/// A model bound to an observation record.
///
/// Cloning is cheap for the dynamics (shared) and copies the observations.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    dynamics: Arc<dyn StateSpaceModel>,
    observations: Vec<f64>,
}

impl ModelSpec {
    pub fn new(dynamics: Arc<dyn StateSpaceModel>) -> Self {
        Self { dynamics, observations: Vec::new() }
    }

    /// Replaces the bound observations with `flat`, laid out row by row.
    pub fn with_observations(mut self, flat: Vec<f64>) -> Result<Self> {
        let ny = self.obs_dim();
        if !flat.len().is_multiple_of(ny) {
            return Err(Error::invalid(format!(
                "observation buffer of length {} is not a multiple of obs_dim {ny}",
                flat.len()
            )));
        }
        self.observations = flat;
        Ok(self)
    }

    /// Appends y_t for the next time index; used by streaming runs.
    pub fn push_observation(&mut self, y: &[f64]) -> Result<()> {
        if y.len() != self.obs_dim() {
            return Err(Error::invalid(format!(
                "observation has length {}, expected {}",
                y.len(),
                self.obs_dim()
            )));
        }
        self.observations.extend_from_slice(y);
        Ok(())
    }

    pub fn dynamics(&self) -> &dyn StateSpaceModel {
        self.dynamics.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.dynamics.obs_dim()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len() / self.obs_dim()
    }

    pub fn observation(&self, t: usize) -> Option<&[f64]> {
        let ny = self.obs_dim();
        self.observations.get(t * ny..(t + 1) * ny)
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.dynamics.sample_initial(rng, out)
    }

    pub fn initial_density(&self, x: &[f64]) -> f64 {
        self.dynamics.initial_log_density(x).exp()
    }

    pub fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.dynamics.sample_transition(x, rng, out)
    }

    /// q(x, x′).
    pub fn transition_density(&self, x: &[f64], x_next: &[f64]) -> f64 {
        self.dynamics.transition_log_density(x, x_next).exp()
    }

    /// g_t(x); fails if y_t has not been bound yet.
    pub fn observation_density(&self, t: usize, x: &[f64]) -> Result<f64> {
        let y = self.observation(t).ok_or(Error::MissingObservation { t })?;
        Ok(self.dynamics.observation_log_density(y, x).exp())
    }

    /// ε̄; fails for simulation-only models.
    pub fn density_upper_bound(&self) -> Result<f64> {
        self.dynamics.transition_density_bound().ok_or_else(|| {
            Error::invalid("model is simulation-only: its transition kernel has no density")
        })
    }
}
