use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::model::ModelSpec;
use crate::objective::{Objective, Objectives, Probe};
use crate::rng::{derive_seed, stream};
use crate::smoothers::{run_adaptive_lag, SmootherConfig};

/// Offset separating reference streams from replicate streams.
const REFERENCE_STREAM: u64 = 1 << 40;

/// E h(X) for X ~ N(mean, var), when available in closed form.
pub fn gaussian_expectation(objective: &Objective, mean: f64, var: f64) -> Option<f64> {
    match objective.name() {
        "identity" | "sum" => Some(mean),
        "square" | "norm_sq" => Some(mean * mean + var),
        "cube" => Some(mean * (mean * mean + 3.0 * var)),
        "exp" => Some((mean + 0.5 * var).exp()),
        _ => None,
    }
}

/// Average of independent untruncated smoother runs, with their range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReference {
    pub key: String,
    pub indices: Vec<usize>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl McReference {
    /// Runs `config.reference_replicates` smoothers with ε = 0 and
    /// `config.reference_particles` particles over `data`, for the marginal
    /// `probe` or, when `None`, for every marginal.
    pub fn compute(config: &ExperimentConfig, data: &ModelSpec, probe: Option<usize>) -> Result<Self> {
        let mut smoother = SmootherConfig::new(config.reference_particles, config.precision, 0.0);
        let probe_objective = probe.map(|index| Probe { index, objective: config.objective.clone() });
        let objectives: &dyn Objectives = match &probe_objective {
            Some(p) => p,
            None => &config.objective,
        };
        smoother.skip_idle_draws = probe.is_some();
        let indices: Vec<usize> = match probe {
            Some(p) => vec![p],
            None => (0..data.num_observations()).collect(),
        };
        let runs: Vec<Vec<f64>> = (0..config.reference_replicates as u64)
            .into_par_iter()
            .map(|r| {
                let rng = stream(derive_seed(config.data_seed, REFERENCE_STREAM + r));
                let run = run_adaptive_lag(data, &smoother, objectives, rng)?;
                let mut by_s = run.marginals;
                by_s.sort_by_key(|m| m.s);
                Ok(by_s.iter().map(|m| m.estimate).collect())
            })
            .collect::<Result<_>>()?;
        let k = indices.len();
        let reps = runs.len() as f64;
        let mut mean = vec![0.0; k];
        let mut min = vec![f64::INFINITY; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        for run in &runs {
            for (j, &v) in run.iter().enumerate() {
                mean[j] += v / reps;
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { key: reference_key(config, probe), indices, mean, min, max })
    }
}

fn reference_key(config: &ExperimentConfig, probe: Option<usize>) -> String {
    format!(
        "sv phi={:?} sigma={:?} beta={:?} horizon={} data_seed={} particles={} precision={} replicates={} objective={} probe={:?}",
        config.phi,
        config.sigma,
        config.beta,
        config.horizon,
        config.data_seed,
        config.reference_particles,
        config.precision,
        config.reference_replicates,
        config.objective,
        probe
    )
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// The stochastic volatility reference, read from `cache_dir` when a run
/// with the same model, data and reference settings was stored there.
pub fn sv_reference(
    config: &ExperimentConfig,
    data: &ModelSpec,
    probe: Option<usize>,
    cache_dir: &Path,
) -> Result<McReference> {
    let key = reference_key(config, probe);
    let path = cache_dir.join(format!("sv-reference-{:016x}.json", fnv1a(&key)));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(cached) = serde_json::from_str::<McReference>(&text) {
            if cached.key == key {
                return Ok(cached);
            }
        }
    }
    let reference = McReference::compute(config, data, probe)?;
    fs::create_dir_all(cache_dir)?;
    fs::write(&path, serde_json::to_string(&reference)?)?;
    Ok(reference)
}
