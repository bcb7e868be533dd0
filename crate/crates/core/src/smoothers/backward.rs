use rand::Rng;

use super::EstimatorBank;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::particle::{weighted_mean, WeightedSample};

/// Draws J ~ Pr({ω^ℓ q(ξ^ℓ, x_new)}_ℓ).
///
/// Proposals J ~ Pr({ω^ℓ}) are accepted with probability q(ξ^J, x_new) / ε̄.
/// After `max_trials` rejections the law is computed exactly in O(N). A
/// vanishing product vector is reported with `particle` 0; [`paris_update`]
/// replaces it with the index of the offending particle.
pub fn backward_index<R: Rng + ?Sized>(
    prev: &WeightedSample,
    x_new: &[f64],
    model: &ModelSpec,
    rng: &mut R,
    max_trials: usize,
) -> Result<usize> {
    let bound = model.density_upper_bound()?;
    draw_one(prev, x_new, model, bound, rng, max_trials, 0)
}

fn draw_one<R: Rng + ?Sized>(
    prev: &WeightedSample,
    x_new: &[f64],
    model: &ModelSpec,
    bound: f64,
    rng: &mut R,
    max_trials: usize,
    particle: usize,
) -> Result<usize> {
    let law = prev.categorical();
    for _ in 0..max_trials {
        let j = law.draw(rng);
        let u: f64 = rng.random();
        if u * bound < model.transition_density(prev.particle(j), x_new) {
            return Ok(j);
        }
    }
    let products: Vec<f64> = (0..prev.len())
        .map(|l| prev.weights()[l] * model.transition_density(prev.particle(l), x_new))
        .collect();
    crate::particle::categorical_draw(&products, rng).map_err(|e| match e {
        Error::DegenerateWeights => Error::DegenerateBackwardWeights { particle },
        other => other,
    })
}

/// K backward indices for every particle of `new`, row-major (particle i owns
/// entries i·K .. (i+1)·K).
pub fn draw_backward_indices<R: Rng + ?Sized>(
    prev: &WeightedSample,
    new: &WeightedSample,
    model: &ModelSpec,
    rng: &mut R,
    precision: usize,
    max_trials: usize,
    out: &mut Vec<usize>,
) -> Result<()> {
    let bound = model.density_upper_bound()?;
    out.clear();
    out.reserve(new.len() * precision);
    for i in 0..new.len() {
        for _ in 0..precision {
            out.push(draw_one(prev, new.particle(i), model, bound, rng, max_trials, i)?);
        }
    }
    Ok(())
}

/// out_i = K⁻¹ Σ_k stats[indices[i·K + k]], clamped to the range of the
/// selected values so that the result never leaves their convex hull.
pub fn average_selected(stats: &[f64], indices: &[usize], precision: usize, out: &mut [f64]) {
    let k = precision as f64;
    for (o, row) in out.iter_mut().zip(indices.chunks_exact(precision)) {
        let (mut acc, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for &j in row {
            let v = stats[j];
            acc += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        *o = (acc / k).clamp(lo, hi);
    }
}

/// Backward-sampled update of every active statistic from `prev` to `new`.
///
/// One set of K indices is drawn per particle of `new` and shared by all
/// active marginals. Indices are drawn even when nothing is active, so the
/// random stream consumed by a run does not depend on the tolerance, unless
/// the bank was configured to skip idle draws.
pub fn paris_update<R: Rng + ?Sized>(
    bank: &mut EstimatorBank,
    prev: &WeightedSample,
    new: &WeightedSample,
    model: &ModelSpec,
    rng: &mut R,
) -> Result<()> {
    if bank.active_len() == 0 && bank.skips_idle_draws() {
        return Ok(());
    }
    let max_trials = bank.max_trials().unwrap_or(prev.len());
    let precision = bank.precision();
    let mut indices = std::mem::take(&mut bank.indices);
    let drawn = draw_backward_indices(prev, new, model, rng, precision, max_trials, &mut indices);
    if drawn.is_ok() {
        bank.apply_indices(&indices, new.len());
    }
    bank.indices = indices;
    drawn
}

/// Exact backward-kernel update
/// τ̃ⁱ = Σ_j ω^j q(ξ^j, ξ′ⁱ) τ_j / Σ_ℓ ω^ℓ q(ξ^ℓ, ξ′ⁱ), at O(N²) cost.
pub fn ffbsm_update(
    stats_prev: &[f64],
    prev: &WeightedSample,
    new: &WeightedSample,
    model: &ModelSpec,
) -> Result<Vec<f64>> {
    if stats_prev.len() != prev.len() {
        return Err(Error::invalid("statistics are not aligned with the previous sample"));
    }
    let mut products = vec![0.0; prev.len()];
    (0..new.len())
        .map(|i| {
            let x_new = new.particle(i);
            for (l, p) in products.iter_mut().enumerate() {
                *p = prev.weights()[l] * model.transition_density(prev.particle(l), x_new);
            }
            let total: f64 = products.iter().sum();
            if !(total > 0.0) {
                return Err(Error::DegenerateBackwardWeights { particle: i });
            }
            let (mut acc, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            for (p, &v) in products.iter().zip(stats_prev) {
                if *p > 0.0 {
                    acc += p * v;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            Ok((acc / total).clamp(lo, hi))
        })
        .collect()
}

/// Weighted population variance Σ_i (ω_i/Ω)(τ_i − τ̄)², two-pass.
pub fn variance_criterion(sample: &WeightedSample, stats: &[f64]) -> f64 {
    let (w, total) = (sample.weights(), sample.total_weight());
    let mean = weighted_mean(w, total, stats.iter().copied());
    let ss: f64 = w.iter().zip(stats).map(|(wi, v)| wi * (v - mean) * (v - mean)).sum();
    (ss / total).max(0.0)
}
