use std::collections::VecDeque;

use super::{weighted_mean, WeightedSample};
use crate::error::{Error, Result};

/// The last `window` particle generations, with their ancestor links.
///
/// Genealogical indices follow G_{t|t}^i = i and G_{s−1|t}^i = I_s^{G_{s|t}^i}.
/// Queries reaching generations that have been dropped fail with
/// [`Error::Retention`].
#[derive(Debug, Clone)]
pub struct GenealogyStore {
    window: usize,
    generations: VecDeque<WeightedSample>,
}

impl GenealogyStore {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1), generations: VecDeque::with_capacity(window.max(1)) }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Appends the next generation, dropping the oldest if the window is full.
    pub fn push(&mut self, sample: WeightedSample) -> Result<()> {
        if let Some(last) = self.generations.back() {
            if sample.t() != last.t() + 1 || sample.len() != last.len() {
                return Err(Error::invalid(format!(
                    "generation {} (N = {}) does not follow generation {} (N = {})",
                    sample.t(),
                    sample.len(),
                    last.t(),
                    last.len()
                )));
            }
        }
        if self.generations.len() == self.window {
            self.generations.pop_front();
        }
        self.generations.push_back(sample);
        Ok(())
    }

    pub fn latest(&self) -> Option<&WeightedSample> {
        self.generations.back()
    }

    pub fn oldest_time(&self) -> Option<usize> {
        self.generations.front().map(WeightedSample::t)
    }

    pub fn get(&self, t: usize) -> Result<&WeightedSample> {
        let oldest = self.oldest_time().unwrap_or(0);
        let retention = Error::Retention { s: t, t, oldest };
        if t < oldest {
            return Err(retention);
        }
        self.generations.get(t - oldest).ok_or(retention)
    }

    /// G_{s|t}^i for every i.
    pub fn ancestor_indices(&self, s: usize, t: usize) -> Result<Vec<usize>> {
        if s > t {
            return Err(Error::invalid(format!("need s <= t, got s = {s}, t = {t}")));
        }
        let oldest = self.oldest_time().unwrap_or(0);
        if s < oldest || self.get(t).is_err() {
            return Err(Error::Retention { s, t, oldest });
        }
        let mut idx: Vec<usize> = (0..self.get(t)?.len()).collect();
        for u in (s + 1..=t).rev() {
            let links = self.get(u)?.ancestors().expect("generations after the first carry ancestors");
            for i in idx.iter_mut() {
                *i = links[*i];
            }
        }
        Ok(idx)
    }
}

/// Poor man's smoother Σ_i (ω_t^i / Ω_t) f(ξ_s^{G_{s|t}^i}).
pub fn poor_mans_estimate<F>(store: &GenealogyStore, s: usize, t: usize, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let idx = store.ancestor_indices(s, t)?;
    let (past, now) = (store.get(s)?, store.get(t)?);
    Ok(weighted_mean(now.weights(), now.total_weight(), idx.iter().map(|&j| f(past.particle(j)))))
}

/// Number of distinct time-s ancestors of the time-t particles.
pub fn unique_ancestors(store: &GenealogyStore, s: usize, t: usize) -> Result<usize> {
    let mut idx = store.ancestor_indices(s, t)?;
    idx.sort_unstable();
    idx.dedup();
    Ok(idx.len())
}

/// Tracks, for each current particle, the index of its time-0 ancestor.
#[derive(Debug, Clone, Default)]
pub struct OriginTracker {
    origin: Vec<usize>,
}

impl OriginTracker {
    pub fn observe(&mut self, sample: &WeightedSample) {
        self.origin = match sample.ancestors() {
            None => (0..sample.len()).collect(),
            Some(links) => links.iter().map(|&j| self.origin[j]).collect(),
        };
    }

    pub fn unique_origins(&self) -> usize {
        let mut o = self.origin.clone();
        o.sort_unstable();
        o.dedup();
        o.len()
    }
}
