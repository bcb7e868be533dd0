use crate::error::{Error, Result};

use super::Categorical;

/// One particle generation {(ξ_t^i, ω_t^i, I_t^i)}.
///
/// Particles are stored row-major, `dim` values each. Ancestor indices are
/// absent at t = 0. The categorical law of the weights is built on
/// construction and reused by resampling and backward sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    t: usize,
    dim: usize,
    particles: Vec<f64>,
    weights: Vec<f64>,
    categorical: Categorical,
    ancestors: Option<Vec<usize>>,
}

impl WeightedSample {
    pub fn new(
        t: usize,
        dim: usize,
        particles: Vec<f64>,
        weights: Vec<f64>,
        ancestors: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 || dim == 0 || particles.len() != n * dim {
            return Err(Error::invalid(format!(
                "sample needs N > 0 weights and N * dim particle values (N = {n}, dim = {dim}, values = {})",
                particles.len()
            )));
        }
        if let Some(a) = &ancestors {
            if a.len() != n {
                return Err(Error::invalid("ancestor vector length differs from N"));
            }
            if let Some(&bad) = a.iter().find(|&&j| j >= n) {
                return Err(Error::invalid(format!("ancestor index {bad} out of range for N = {n}")));
            }
        }
        if weights.iter().any(|w| w.is_nan()) {
            return Err(Error::Numerical(format!("NaN weight at time {t}")));
        }
        let categorical = match Categorical::new(&weights) {
            Ok(c) => c,
            Err(Error::DegenerateWeights) => return Err(Error::WeightCollapse { t }),
            Err(e) => return Err(e),
        };
        Ok(Self { t, dim, particles, weights, categorical, ancestors })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Ω_t.
    pub fn total_weight(&self) -> f64 {
        self.categorical.total()
    }

    pub fn ancestors(&self) -> Option<&[usize]> {
        self.ancestors.as_deref()
    }

    pub fn categorical(&self) -> &Categorical {
        &self.categorical
    }

    /// Effective sample size Ω² / Σ ω_i².
    pub fn ess(&self) -> f64 {
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        self.total_weight().powi(2) / sq
    }
}

/// Σ_i ω_i v_i / Ω in index order, clamped to [min v, max v].
///
/// Rounding can push a weighted average of equal values off that value; the
/// clamp keeps averages of constants exact.
pub(crate) fn weighted_mean<I>(weights: &[f64], total: f64, values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let (mut acc, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for (w, v) in weights.iter().zip(values) {
        acc += w * v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (acc / total).clamp(lo, hi)
}

/// Self-normalised estimate Σ_i (ω_i / Ω) f(ξ_i) of φ_t f.
pub fn filter_estimate<F>(sample: &WeightedSample, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    weighted_mean(
        sample.weights(),
        sample.total_weight(),
        (0..sample.len()).map(|i| f(sample.particle(i))),
    )
}
