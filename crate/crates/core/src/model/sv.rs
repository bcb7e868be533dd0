use std::f64::consts::PI;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ModelSpec, StateSpaceModel};
use crate::error::{Error, Result};
use crate::gaussian::LN_2PI;

/// X_{t+1} = φ X_t + σ U_{t+1}, Y_t = β exp(X_t / 2) V_t, X_0 ~ N(0, σ²/(1 − φ²)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub phi: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl SvParams {
    /// (φ, σ, β) = (.98, √.1, √.7).
    pub fn benchmark() -> Self {
        Self { phi: 0.98, sigma: 0.1_f64.sqrt(), beta: 0.7_f64.sqrt() }
    }

    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.phi * self.phi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) {
            return Err(Error::invalid(format!("|phi| must be < 1, got {}", self.phi)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StochasticVolatility {
    params: SvParams,
    initial_sd: f64,
    log_norm_transition: f64,
}

impl StochasticVolatility {
    pub fn new(params: SvParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            initial_sd: params.stationary_variance().sqrt(),
            log_norm_transition: -0.5 * LN_2PI - params.sigma.ln(),
            params,
        })
    }

    pub fn params(&self) -> &SvParams {
        &self.params
    }
}

impl StateSpaceModel for StochasticVolatility {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn sample_initial(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = self.initial_sd * z;
    }

    fn initial_log_density(&self, x: &[f64]) -> f64 {
        let u = x[0] / self.initial_sd;
        -0.5 * LN_2PI - self.initial_sd.ln() - 0.5 * u * u
    }

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = self.params.phi * x[0] + self.params.sigma * z;
    }

    fn transition_log_density(&self, x: &[f64], x_next: &[f64]) -> f64 {
        let u = (x_next[0] - self.params.phi * x[0]) / self.params.sigma;
        self.log_norm_transition - 0.5 * u * u
    }

    fn sample_observation(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = self.params.beta * (0.5 * x[0]).exp() * z;
    }

    /// log N(y; 0, β² e^x).
    fn observation_log_density(&self, y: &[f64], x: &[f64]) -> f64 {
        let b = self.params.beta;
        -0.5 * LN_2PI - b.ln() - 0.5 * x[0] - 0.5 * y[0] * y[0] / (b * b * x[0].exp())
    }

    /// Mode of the Gaussian transition, 1/(√(2π) σ).
    fn transition_density_bound(&self) -> Option<f64> {
        Some(1.0 / ((2.0 * PI).sqrt() * self.params.sigma))
    }
}

pub fn make_sv(params: SvParams) -> Result<ModelSpec> {
    Ok(ModelSpec::new(Arc::new(StochasticVolatility::new(params)?)))
}
