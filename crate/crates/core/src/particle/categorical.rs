use rand::Rng;

use crate::error::{Error, Result};

/// Inverse-CDF sampler for Pr({ω_i}), the categorical law with probabilities
/// proportional to nonnegative weights.
///
/// A draw takes u uniform on (0, Ω] and returns the first index whose
/// cumulative weight is ≥ u, so zero-weight atoms are never returned.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(weights.len());
        for &w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("weights must be finite and nonnegative, got {w}")));
            }
            acc += w;
            cumulative.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        Ok(Self { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Ω = Σ ω_i.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("a categorical has at least one atom")
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = self.total() * (1.0 - rng.random::<f64>());
        self.cumulative.partition_point(|&c| c < u).min(self.cumulative.len() - 1)
    }
}

/// One draw from Pr(weights).
pub fn categorical_draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    Ok(Categorical::new(weights)?.draw(rng))
}
