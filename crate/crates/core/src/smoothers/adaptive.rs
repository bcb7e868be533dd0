use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backward::{average_selected, paris_update, variance_criterion};
use crate::error::{Error, Result};
use crate::marginal::SmoothedMarginal;
use crate::model::ModelSpec;
use crate::objective::Objectives;
use crate::particle::{bootstrap_init, bootstrap_step, weighted_mean, WeightedSample};

/// Tuning of one adaptive-lag run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    /// Number of particles N.
    pub particles: usize,
    /// Backward draws per particle and step, K.
    pub precision: usize,
    /// Stopping tolerance. Zero never stops, so every marginal is carried to
    /// the horizon.
    pub epsilon: f64,
    /// Rejection attempts before the exact O(N) draw; defaults to N.
    pub max_trials: Option<usize>,
    /// Hard cap on the number of simultaneously active marginals.
    pub max_active: Option<usize>,
    /// Marginal whose criterion is recorded at every step while active.
    pub trace_marginal: Option<usize>,
    /// Skip backward sampling while no marginal is active. Saves work when
    /// only a few marginals are of interest, but makes the random stream
    /// depend on the activation pattern.
    #[serde(default)]
    pub skip_idle_draws: bool,
}

impl SmootherConfig {
    pub fn new(particles: usize, precision: usize, epsilon: f64) -> Self {
        Self { particles, precision, epsilon, max_trials: None, max_active: None, trace_marginal: None, skip_idle_draws: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("particle count must be positive"));
        }
        if self.precision == 0 {
            return Err(Error::invalid("precision K must be at least 1"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid(format!("tolerance must be non-negative, got {}", self.epsilon)));
        }
        if self.max_active == Some(0) {
            return Err(Error::invalid("active-set cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Estimator {
    activation_time: usize,
    stats: Vec<f64>,
}

/// The active marginals S with their statistics τ_{s|t}ⁱ.
#[derive(Debug, Clone)]
pub struct EstimatorBank {
    epsilon: f64,
    precision: usize,
    max_trials: Option<usize>,
    max_active: Option<usize>,
    active: BTreeMap<usize, Estimator>,
    pub(super) indices: Vec<usize>,
    spare: Vec<Vec<f64>>,
    watch: Option<usize>,
    watched: Vec<f64>,
    skip_idle_draws: bool,
}

impl EstimatorBank {
    pub fn new(config: &SmootherConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            epsilon: config.epsilon,
            precision: config.precision,
            max_trials: config.max_trials,
            max_active: config.max_active,
            active: BTreeMap::new(),
            indices: Vec::new(),
            spare: Vec::new(),
            watch: config.trace_marginal,
            watched: Vec::new(),
            skip_idle_draws: config.skip_idle_draws,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn max_trials(&self) -> Option<usize> {
        self.max_trials
    }

    pub fn skips_idle_draws(&self) -> bool {
        self.skip_idle_draws
    }

    pub fn active_len(&self) -> usize {
        self.active.len()
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.keys().copied()
    }

    pub fn stats(&self, s: usize) -> Option<&[f64]> {
        self.active.get(&s).map(|e| e.stats.as_slice())
    }

    pub fn activation_time(&self, s: usize) -> Option<usize> {
        self.active.get(&s).map(|e| e.activation_time)
    }

    /// Criterion values of the traced marginal, one per step from its
    /// activation until it stopped.
    pub fn criterion_trace(&self) -> &[f64] {
        &self.watched
    }

    /// Activates `s` with the given statistics, replacing any current ones.
    pub fn insert(&mut self, s: usize, activation_time: usize, stats: Vec<f64>) {
        self.active.insert(s, Estimator { activation_time, stats });
    }

    pub(super) fn apply_indices(&mut self, indices: &[usize], n: usize) {
        for est in self.active.values_mut() {
            let mut next = self.spare.pop().unwrap_or_default();
            next.resize(n, 0.0);
            average_selected(&est.stats, indices, self.precision, &mut next);
            let old = std::mem::replace(&mut est.stats, next);
            self.spare.push(old);
        }
    }

    fn activate(&mut self, sample: &WeightedSample, objectives: &dyn Objectives) {
        let t = sample.t();
        let mut stats = self.spare.pop().unwrap_or_default();
        stats.clear();
        stats.extend((0..sample.len()).map(|i| objectives.eval(t, sample.particle(i))));
        self.active.insert(t, Estimator { activation_time: t, stats });
    }

    fn retire(&mut self, s: usize) {
        if let Some(est) = self.active.remove(&s) {
            self.spare.push(est.stats);
        }
    }

    /// Emits every active marginal as truncated at the time of `sample`.
    pub fn flush(&mut self, sample: &WeightedSample) -> Vec<SmoothedMarginal> {
        let out: Vec<SmoothedMarginal> = self
            .active
            .iter()
            .map(|(&s, est)| {
                let estimate = weighted_mean(sample.weights(), sample.total_weight(), est.stats.iter().copied());
                SmoothedMarginal::new(s, estimate, sample.t(), variance_criterion(sample, &est.stats), true)
            })
            .collect();
        let done: Vec<usize> = self.active.keys().copied().collect();
        done.into_iter().for_each(|s| self.retire(s));
        out
    }
}

/// One pass of the adaptive-lag loop at the time of `new`.
///
/// Updates every active statistic from `prev` (absent at time 0), activates
/// t = new.t() when the objectives cover it, then retires each marginal whose
/// criterion is strictly below ε. With `is_final`, the remaining marginals are
/// emitted as truncated. Emission within a step is in increasing s.
pub fn adaptive_lag_step<R: Rng + ?Sized>(
    bank: &mut EstimatorBank,
    prev: Option<&WeightedSample>,
    new: &WeightedSample,
    model: &ModelSpec,
    rng: &mut R,
    objectives: &dyn Objectives,
    is_final: bool,
) -> Result<Vec<SmoothedMarginal>> {
    let t = new.t();
    match prev {
        Some(p) => {
            if p.t() + 1 != t || p.len() != new.len() {
                return Err(Error::invalid(format!(
                    "sample at time {t} (N = {}) does not follow time {} (N = {})",
                    new.len(),
                    p.t(),
                    p.len()
                )));
            }
            paris_update(bank, p, new, model, rng)?;
        }
        None if bank.active_len() > 0 => {
            return Err(Error::invalid("a previous sample is required while marginals are active"));
        }
        None => {}
    }
    if objectives.applies(t) {
        bank.activate(new, objectives);
    }

    let mut emitted = Vec::new();
    for (&s, est) in &bank.active {
        let v = variance_criterion(new, &est.stats);
        if bank.watch == Some(s) {
            bank.watched.push(v);
        }
        let stop = v < bank.epsilon;
        if stop || is_final {
            let estimate = weighted_mean(new.weights(), new.total_weight(), est.stats.iter().copied());
            emitted.push(SmoothedMarginal::new(s, estimate, t, v, !stop));
        }
    }
    for m in &emitted {
        bank.retire(m.s);
    }
    if let Some(cap) = bank.max_active {
        if bank.active_len() > cap {
            return Err(Error::ActiveSetOverflow { t, cap });
        }
    }
    Ok(emitted)
}

/// Online driver: a bootstrap filter feeding an [`EstimatorBank`].
///
/// Observations may be appended while the smoother runs; each call to
/// [`step`](Self::step) consumes the next one.
#[derive(Debug)]
pub struct AdaptiveLagSmoother<R> {
    model: ModelSpec,
    particles: usize,
    bank: EstimatorBank,
    rng: R,
    current: Option<WeightedSample>,
}

impl<R: Rng> AdaptiveLagSmoother<R> {
    pub fn new(model: ModelSpec, config: &SmootherConfig, rng: R) -> Result<Self> {
        let bank = EstimatorBank::new(config)?;
        model.density_upper_bound()?;
        Ok(Self { model, particles: config.particles, bank, rng, current: None })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn bank(&self) -> &EstimatorBank {
        &self.bank
    }

    pub fn current(&self) -> Option<&WeightedSample> {
        self.current.as_ref()
    }

    pub fn push_observation(&mut self, y: &[f64]) -> Result<()> {
        self.model.push_observation(y)
    }

    /// Time index the next [`step`](Self::step) will process.
    pub fn next_time(&self) -> usize {
        self.current.as_ref().map_or(0, |s| s.t() + 1)
    }

    /// Whether an observation is bound for [`next_time`](Self::next_time).
    pub fn has_pending(&self) -> bool {
        self.next_time() < self.model.num_observations()
    }

    pub fn step(&mut self, objectives: &dyn Objectives, is_final: bool) -> Result<Vec<SmoothedMarginal>> {
        let next = match &self.current {
            None => bootstrap_init(&self.model, self.particles, &mut self.rng)?,
            Some(prev) => bootstrap_step(prev, &self.model, &mut self.rng)?,
        };
        let emitted =
            adaptive_lag_step(&mut self.bank, self.current.as_ref(), &next, &self.model, &mut self.rng, objectives, is_final)?;
        self.current = Some(next);
        Ok(emitted)
    }

    /// Emits every still-active marginal as truncated at the current time.
    pub fn finish(&mut self) -> Vec<SmoothedMarginal> {
        match &self.current {
            Some(sample) => self.bank.flush(sample),
            None => Vec::new(),
        }
    }
}

/// Result of a complete adaptive-lag run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun {
    /// Marginals in emission order (by stop time, then s).
    pub marginals: Vec<SmoothedMarginal>,
    /// |S_t| after the stopping test at every t.
    pub active_sizes: Vec<usize>,
    /// Criterion of the traced marginal from activation to stop.
    pub criterion_trace: Vec<f64>,
}

/// Runs the smoother over every observation bound in `model`.
pub fn run_adaptive_lag<R: Rng>(
    model: &ModelSpec,
    config: &SmootherConfig,
    objectives: &dyn Objectives,
    rng: R,
) -> Result<AdaptiveRun> {
    let horizon = model.num_observations();
    let mut smoother = AdaptiveLagSmoother::new(model.clone(), config, rng)?;
    let mut marginals = Vec::new();
    let mut active_sizes = Vec::with_capacity(horizon);
    for t in 0..horizon {
        marginals.extend(smoother.step(objectives, t + 1 == horizon)?);
        active_sizes.push(smoother.bank().active_len());
    }
    Ok(AdaptiveRun { marginals, active_sizes, criterion_trace: smoother.bank.watched })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lgssm, simulate, LgssmParams};
    use crate::objective::{Objective, Probe};
    use crate::particle::filter_estimate;
    use crate::rng::stream;

    fn data(horizon: usize, seed: u64) -> ModelSpec {
        let model = make_lgssm(LgssmParams::benchmark()).unwrap();
        let obs = simulate(&model, horizon, seed).observations;
        model.with_observations(obs).unwrap()
    }

    #[test]
    fn huge_tolerance_emits_filter_estimates() {
        let model = data(30, 1);
        let config = SmootherConfig::new(100, 2, 1e16);
        let mut smoother = AdaptiveLagSmoother::new(model.clone(), &config, stream(5)).unwrap();
        for t in 0..=30 {
            let emitted = smoother.step(&Objective::Identity, t == 30).unwrap();
            assert_eq!(emitted.len(), 1);
            let m = emitted[0];
            assert_eq!((m.s, m.stop_time, m.lag, m.truncated_by_horizon), (t, t, 0, false));
            assert_eq!(m.estimate, filter_estimate(smoother.current().unwrap(), |x| x[0]));
            assert_eq!(smoother.bank().active_len(), 0);
        }
    }

    #[test]
    fn zero_objective_stops_at_activation() {
        let model = data(20, 2);
        let zero = |_: usize, _: &[f64]| 0.0;
        let run = run_adaptive_lag(&model, &SmootherConfig::new(50, 2, 1e-12), &zero, stream(1)).unwrap();
        assert_eq!(run.marginals.len(), 21);
        assert!(run.marginals.iter().all(|m| m.lag == 0 && m.estimate == 0.0 && m.variance_at_stop == 0.0));
    }

    #[test]
    fn zero_tolerance_carries_everything_to_horizon() {
        let model = data(15, 3);
        let run = run_adaptive_lag(&model, &SmootherConfig::new(50, 2, 0.0), &Objective::Identity, stream(2)).unwrap();
        assert_eq!(run.marginals.len(), 16);
        for (s, m) in run.marginals.iter().enumerate() {
            assert_eq!((m.s, m.stop_time, m.lag), (s, 15, 15 - s));
            assert!(m.truncated_by_horizon);
        }
        assert_eq!(run.active_sizes.last(), Some(&0));
        assert_eq!(run.active_sizes[14], 15);
    }

    #[test]
    fn stop_times_are_monotone_in_tolerance() {
        let model = data(80, 4);
        let stops = |eps: f64| {
            let mut run =
                run_adaptive_lag(&model, &SmootherConfig::new(80, 2, eps), &Objective::Identity, stream(9)).unwrap();
            run.marginals.sort_by_key(|m| m.s);
            run.marginals.iter().map(|m| m.stop_time).collect::<Vec<_>>()
        };
        let grid = [0.5, 0.1, 1e-2, 1e-3];
        let all: Vec<_> = grid.iter().map(|&e| stops(e)).collect();
        for w in all.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(a, b)| b >= a));
        }
    }

    #[test]
    fn stopped_marginals_respect_tolerance() {
        let model = data(60, 5);
        let eps = 1e-2;
        let run = run_adaptive_lag(&model, &SmootherConfig::new(100, 2, eps), &Objective::Square, stream(3)).unwrap();
        let mut seen = vec![false; 61];
        for m in &run.marginals {
            assert!(m.truncated_by_horizon || m.variance_at_stop < eps);
            assert!(!m.truncated_by_horizon || m.stop_time == 60);
            seen[m.s] = true;
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn online_driver_matches_batch_run() {
        let model = data(40, 6);
        let config = SmootherConfig::new(60, 2, 1e-2);
        let batch = run_adaptive_lag(&model, &config, &Objective::Identity, stream(8)).unwrap();

        let obs = model.observations().to_vec();
        let empty = model.clone().with_observations(Vec::new()).unwrap();
        let mut online = AdaptiveLagSmoother::new(empty, &config, stream(8)).unwrap();
        let mut out = Vec::new();
        for y in obs.chunks(1) {
            online.push_observation(y).unwrap();
            while online.has_pending() {
                out.extend(online.step(&Objective::Identity, false).unwrap());
            }
        }
        out.extend(online.finish());
        assert_eq!(out, batch.marginals);
    }

    #[test]
    fn probe_and_trace() {
        let model = data(50, 7);
        let mut config = SmootherConfig::new(100, 2, 1e-3);
        config.trace_marginal = Some(10);
        let probe = Probe { index: 10, objective: Objective::Identity };
        let run = run_adaptive_lag(&model, &config, &probe, stream(1)).unwrap();
        assert_eq!(run.marginals.len(), 1);
        let m = run.marginals[0];
        assert_eq!(m.s, 10);
        assert_eq!(run.criterion_trace.len(), m.lag + 1);
        assert_eq!(*run.criterion_trace.last().unwrap(), m.variance_at_stop);
    }

    #[test]
    fn active_cap_is_enforced() {
        let model = data(30, 8);
        let mut config = SmootherConfig::new(30, 2, 0.0);
        config.max_active = Some(5);
        let err = run_adaptive_lag(&model, &config, &Objective::Identity, stream(1)).unwrap_err();
        assert!(matches!(err, Error::ActiveSetOverflow { t: 5, cap: 5 }));
    }

    #[test]
    fn config_validation() {
        assert!(SmootherConfig::new(0, 2, 0.1).validate().is_err());
        assert!(SmootherConfig::new(10, 0, 0.1).validate().is_err());
        assert!(SmootherConfig::new(10, 2, -1.0).validate().is_err());
        assert!(SmootherConfig::new(10, 2, f64::NAN).validate().is_err());
        assert!(SmootherConfig::new(10, 1, 0.0).validate().is_ok());
    }
}
