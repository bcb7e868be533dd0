use rand::{Rng, RngCore};

use super::WeightedSample;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

fn require_particle_model(model: &ModelSpec) -> Result<()> {
    model.density_upper_bound().map(|_| ())
}

fn weight_of(model: &ModelSpec, y: &[f64], x: &[f64]) -> f64 {
    model.dynamics().observation_log_density(y, x).exp()
}

/// Initial generation: ξ_0^i ~ χ, ω_0^i = g_0(ξ_0^i).
pub fn bootstrap_init<R: Rng>(model: &ModelSpec, n: usize, rng: &mut R) -> Result<WeightedSample> {
    require_particle_model(model)?;
    if n == 0 {
        return Err(Error::invalid("particle count must be positive"));
    }
    let y = model.observation(0).ok_or(Error::MissingObservation { t: 0 })?;
    let dim = model.state_dim();
    let rng: &mut dyn RngCore = rng;
    let mut particles = vec![0.0; n * dim];
    let mut weights = Vec::with_capacity(n);
    for x in particles.chunks_exact_mut(dim) {
        model.sample_initial(rng, x);
        weights.push(weight_of(model, y, x));
    }
    WeightedSample::new(0, dim, particles, weights, None)
}

/// One step of the bootstrap filter. For each i: draw I ~ Pr({ω_t}), move
/// ξ_{t+1}^i ~ Q(ξ_t^I, ·) and weight ω_{t+1}^i = g_{t+1}(ξ_{t+1}^i).
pub fn bootstrap_step<R: Rng>(sample: &WeightedSample, model: &ModelSpec, rng: &mut R) -> Result<WeightedSample> {
    require_particle_model(model)?;
    let t = sample.t() + 1;
    let y = model.observation(t).ok_or(Error::MissingObservation { t })?;
    let (n, dim) = (sample.len(), sample.dim());
    let rng: &mut dyn RngCore = rng;
    let mut particles = vec![0.0; n * dim];
    let mut weights = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    for x in particles.chunks_exact_mut(dim) {
        let parent = sample.categorical().draw(rng);
        model.sample_transition(sample.particle(parent), rng, x);
        weights.push(weight_of(model, y, x));
        ancestors.push(parent);
    }
    WeightedSample::new(t, dim, particles, weights, Some(ancestors))
}

/// Runs the filter over every observation bound in `model`.
pub fn run_filter<R: Rng>(model: &ModelSpec, n: usize, rng: &mut R) -> Result<Vec<WeightedSample>> {
    let len = model.num_observations();
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return Ok(out);
    }
    out.push(bootstrap_init(model, n, rng)?);
    for _ in 1..len {
        let next = bootstrap_step(out.last().expect("non-empty"), model, rng)?;
        out.push(next);
    }
    Ok(out)
}
