use rand::Rng;

use crate::error::{Error, Result};
use crate::marginal::SmoothedMarginal;
use crate::model::ModelSpec;
use crate::objective::Objectives;
use crate::particle::{bootstrap_init, bootstrap_step, weighted_mean, GenealogyStore, WeightedSample};

/// Fixed-lag smoother with lag `delta` over every bound observation.
///
/// The marginal s is estimated from the genealogy at λ = (s + Δ) ∧ T; the
/// reported variance is the weighted variance of h_s over the traced
/// ancestors, and marginals with λ = T < s + Δ are flagged as truncated.
pub fn fixed_lag_run<R: Rng>(
    model: &ModelSpec,
    delta: usize,
    particles: usize,
    objectives: &dyn Objectives,
    rng: &mut R,
) -> Result<Vec<SmoothedMarginal>> {
    Ok(fixed_lag_runs(model, &[delta], particles, objectives, rng)?.remove(0))
}

/// Several fixed-lag smoothers sharing one particle filter run. The result
/// holds one marginal sequence per entry of `deltas`, in the same order.
pub fn fixed_lag_runs<R: Rng>(
    model: &ModelSpec,
    deltas: &[usize],
    particles: usize,
    objectives: &dyn Objectives,
    rng: &mut R,
) -> Result<Vec<Vec<SmoothedMarginal>>> {
    if deltas.is_empty() || deltas.contains(&0) {
        return Err(Error::invalid("fixed-lag smoothing needs lags >= 1"));
    }
    let horizon = model.num_observations();
    let mut out = vec![Vec::new(); deltas.len()];
    if horizon == 0 {
        return Ok(out);
    }
    let last = horizon - 1;
    let window = deltas.iter().max().copied().unwrap_or(1).min(last) + 1;
    let mut store = GenealogyStore::new(window);
    let mut sample = bootstrap_init(model, particles, rng)?;
    for t in 0..=last {
        if t > 0 {
            sample = bootstrap_step(&sample, model, rng)?;
        }
        store.push(sample.clone())?;
        for (k, &delta) in deltas.iter().enumerate() {
            if t >= delta && objectives.applies(t - delta) {
                out[k].push(genealogy_marginal(&store, t - delta, t, objectives, false)?);
            }
            if t == last {
                for s in last.saturating_sub(delta - 1)..=last {
                    if s + delta > last && objectives.applies(s) {
                        out[k].push(genealogy_marginal(&store, s, last, objectives, true)?);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn genealogy_marginal(
    store: &GenealogyStore,
    s: usize,
    t: usize,
    objectives: &dyn Objectives,
    truncated: bool,
) -> Result<SmoothedMarginal> {
    let idx = store.ancestor_indices(s, t)?;
    let (past, now): (&WeightedSample, &WeightedSample) = (store.get(s)?, store.get(t)?);
    let values: Vec<f64> = idx.iter().map(|&j| objectives.eval(s, past.particle(j))).collect();
    let (w, total) = (now.weights(), now.total_weight());
    let mean = weighted_mean(w, total, values.iter().copied());
    let var = w.iter().zip(&values).map(|(wi, v)| wi * (v - mean) * (v - mean)).sum::<f64>() / total;
    Ok(SmoothedMarginal::new(s, mean, t, var.max(0.0), truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_lgssm, simulate, LgssmParams};
    use crate::objective::{Objective, Probe};
    use crate::particle::{filter_estimate, poor_mans_estimate};
    use crate::rng::stream;

    fn data(horizon: usize, seed: u64) -> ModelSpec {
        let model = make_lgssm(LgssmParams::benchmark()).unwrap();
        let obs = simulate(&model, horizon, seed).observations;
        model.with_observations(obs).unwrap()
    }

    fn full_store(model: &ModelSpec, n: usize, seed: u64) -> GenealogyStore {
        let mut rng = stream(seed);
        let horizon = model.num_observations();
        let mut store = GenealogyStore::new(horizon);
        let mut s = bootstrap_init(model, n, &mut rng).unwrap();
        store.push(s.clone()).unwrap();
        for _ in 1..horizon {
            s = bootstrap_step(&s, model, &mut rng).unwrap();
            store.push(s.clone()).unwrap();
        }
        store
    }

    #[test]
    fn long_lag_is_poor_mans_at_horizon() {
        let model = data(25, 1);
        let out = fixed_lag_run(&model, 40, 64, &Objective::Square, &mut stream(3)).unwrap();
        let store = full_store(&model, 64, 3);
        assert_eq!(out.len(), 26);
        for m in &out {
            assert_eq!(m.stop_time, 25);
            assert!(m.truncated_by_horizon);
            assert_eq!(m.estimate, poor_mans_estimate(&store, m.s, 25, |x| x[0] * x[0]).unwrap());
        }
    }

    #[test]
    fn unit_lag_at_horizon_is_filter() {
        let model = data(10, 2);
        let out = fixed_lag_run(&model, 1, 32, &Objective::Identity, &mut stream(4)).unwrap();
        let store = full_store(&model, 32, 4);
        let last = out.iter().find(|m| m.s == 10).unwrap();
        assert_eq!(last.lag, 0);
        assert_eq!(last.estimate, filter_estimate(store.get(10).unwrap(), |x| x[0]));
        let mid = out.iter().find(|m| m.s == 4).unwrap();
        assert_eq!((mid.stop_time, mid.lag, mid.truncated_by_horizon), (5, 1, false));
        assert_eq!(out.len(), 11);
    }

    #[test]
    fn shared_run_matches_single_runs() {
        let model = data(30, 3);
        let probe = Probe { index: 12, objective: Objective::Square };
        let many = fixed_lag_runs(&model, &[1, 4, 64], 50, &probe, &mut stream(6)).unwrap();
        let store = full_store(&model, 50, 6);
        for (k, delta) in [1usize, 4, 64].into_iter().enumerate() {
            assert_eq!(many[k].len(), 1);
            let lambda = (12 + delta).min(30);
            let pm = poor_mans_estimate(&store, 12, lambda, |x| x[0] * x[0]).unwrap();
            assert_eq!(many[k][0].estimate, pm);
        }
    }

    #[test]
    fn paper_lag_grid_is_accepted() {
        let model = data(150, 4);
        let grid = [1, 2, 4, 8, 16, 32, 64, 128];
        let runs = fixed_lag_runs(&model, &grid, 400, &Objective::Square, &mut stream(1)).unwrap();
        assert!(runs.iter().all(|r| r.len() == 151));
    }

    #[test]
    fn zero_lag_rejected() {
        let model = data(5, 5);
        assert!(fixed_lag_run(&model, 0, 10, &Objective::Identity, &mut stream(1)).is_err());
    }
}
