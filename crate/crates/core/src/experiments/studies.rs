use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, ModelKind, Study};
use super::reference::{gaussian_expectation, sv_reference, McReference};
use super::report::{efficiency, MarginalSummary, MethodReport, Report};
use crate::error::{Error, Result};
use crate::kalman::{disturbance_smoother, ideal_adaptive_lag_run};
use crate::marginal::SmoothedMarginal;
use crate::model::{simulate, ModelSpec};
use crate::objective::Probe;
use crate::rng::{derive_seed, stream};
use crate::smoothers::{fixed_lag_runs, run_adaptive_lag, AdaptiveLagSmoother, SmootherConfig};

/// One replicate's estimates, aligned with the study's marginal indices.
struct Replicate {
    estimates: Vec<f64>,
    lags: Vec<f64>,
    active_sizes: Vec<usize>,
    seconds: f64,
}

impl Replicate {
    fn from_marginals(marginals: &[SmoothedMarginal], indices: &[usize], active_sizes: Vec<usize>, seconds: f64) -> Result<Self> {
        let mut estimates = vec![f64::NAN; indices.len()];
        let mut lags = vec![f64::NAN; indices.len()];
        for m in marginals {
            if let Ok(k) = indices.binary_search(&m.s) {
                estimates[k] = m.estimate;
                lags[k] = m.lag as f64;
            }
        }
        if estimates.iter().any(|e| e.is_nan()) {
            return Err(Error::Numerical("a smoother run did not emit every requested marginal".into()));
        }
        Ok(Self { estimates, lags, active_sizes, seconds })
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let std = if n > 1.0 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    (mean, std)
}

fn summarize(method: &str, param: f64, reps: &[Replicate], indices: &[usize], reference: &[f64]) -> MethodReport {
    let marginals: Vec<MarginalSummary> = indices
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let (mean, std) = mean_std(reps.iter().map(|r| r.estimates[k]));
            let lag_mean = reps.iter().map(|r| r.lags[k]).sum::<f64>() / reps.len() as f64;
            MarginalSummary { s, mean, std, lag_mean }
        })
        .collect();
    let cells = (reps.len() * indices.len()) as f64;
    let mse = reps
        .iter()
        .flat_map(|r| r.estimates.iter().zip(reference).map(|(e, x)| (e - x) * (e - x)))
        .sum::<f64>()
        / cells;
    let bias = marginals.iter().zip(reference).map(|(m, x)| m.mean - x).sum::<f64>() / indices.len() as f64;
    let runtime_seconds = reps.iter().map(|r| r.seconds).sum::<f64>() / reps.len() as f64;
    MethodReport {
        method: method.to_string(),
        param,
        mse,
        bias,
        max_active: reps.iter().flat_map(|r| r.active_sizes.iter().copied()).max().unwrap_or(0),
        active_trace: reps[0].active_sizes.clone(),
        replicate_estimates: if indices.len() == 1 { reps.iter().map(|r| r.estimates[0]).collect() } else { Vec::new() },
        marginals,
        runtime_seconds,
        efficiency: efficiency(mse, runtime_seconds).ok(),
    }
}

fn replicate_seed(config: &ExperimentConfig, r: usize) -> u64 {
    derive_seed(config.seed, r as u64)
}

/// The study's dataset: T + 1 observations simulated from `data_seed`.
pub fn simulate_data(config: &ExperimentConfig) -> Result<ModelSpec> {
    let model = config.build_model()?;
    let observations = simulate(&model, config.horizon, config.data_seed).observations;
    model.with_observations(observations)
}

/// Criterion of s = 0 at every t, from an untruncated run of replicate 0.
fn variance_trace(config: &ExperimentConfig, data: &ModelSpec) -> Result<Vec<f64>> {
    let mut smoother = SmootherConfig::new(config.particles, config.precision, 0.0);
    smoother.trace_marginal = Some(0);
    let probe = Probe { index: 0, objective: config.objective.clone() };
    Ok(run_adaptive_lag(data, &smoother, &probe, stream(replicate_seed(config, 0)))?.criterion_trace)
}

/// R adaptive-lag replicates at tolerance `epsilon` over every marginal.
fn adaptive_replicates(config: &ExperimentConfig, data: &ModelSpec, epsilon: f64) -> Result<Vec<Replicate>> {
    let smoother = SmootherConfig::new(config.particles, config.precision, epsilon);
    let indices: Vec<usize> = (0..=config.horizon).collect();
    (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let run = run_adaptive_lag(data, &smoother, &config.objective, stream(replicate_seed(config, r)))?;
            let seconds = start.elapsed().as_secs_f64();
            Replicate::from_marginals(&run.marginals, &indices, run.active_sizes, seconds)
        })
        .collect()
}

fn check_model(config: &ExperimentConfig, expected: ModelKind, study: Study) -> Result<()> {
    config.validate(study)?;
    if config.model != expected {
        return Err(Error::Config(format!("{study} needs model = {:?}", expected).to_lowercase()));
    }
    Ok(())
}

/// Adaptive-lag accuracy and cost on the linear Gaussian model, against the
/// exact smoother, with the exact adaptive-lag algorithm alongside when the
/// objective is affine.
pub fn run_lgssm_experiment(config: &ExperimentConfig) -> Result<Report> {
    check_model(config, ModelKind::Lgssm, Study::LgssmStudy)?;
    let params = config.lgssm_params()?;
    let data = simulate_data(config)?;
    let obs = data.observations().to_vec();
    let smoothed = disturbance_smoother(&params, &obs)?;
    let reference = smoothed
        .iter()
        .map(|m| gaussian_expectation(&config.objective, m.mean[0], m.cov[(0, 0)]))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::Config(format!("no exact reference for objective '{}'", config.objective)))?;
    let indices: Vec<usize> = (0..=config.horizon).collect();

    let mut methods = Vec::new();
    for &eps in &config.epsilons {
        let reps = adaptive_replicates(config, &data, eps)?;
        methods.push(summarize("adaptive", eps, &reps, &indices, &reference));
    }
    if let Some((alpha, beta)) = config.objective.affine(params.state_dim()) {
        for &eps in config.epsilons.iter().filter(|e| **e > 0.0) {
            let start = Instant::now();
            let run = ideal_adaptive_lag_run(&params, &obs, |_| (alpha.clone(), beta), eps)?;
            let seconds = start.elapsed().as_secs_f64();
            let rep = Replicate::from_marginals(&run, &indices, Vec::new(), seconds)?;
            methods.push(summarize("ideal", eps, &[rep], &indices, &reference));
        }
    }
    Ok(Report {
        study: Study::LgssmStudy.to_string(),
        config: config.clone(),
        indices,
        reference,
        reference_band: None,
        methods,
        variance_trace: variance_trace(config, &data)?,
    })
}

/// Stochastic volatility study against the averaged untruncated reference,
/// cached under `output_dir/cache`.
pub fn run_sv_experiment(config: &ExperimentConfig) -> Result<Report> {
    check_model(config, ModelKind::Sv, Study::SvStudy)?;
    let data = simulate_data(config)?;
    let McReference { indices, mean, min, max, .. } =
        sv_reference(config, &data, None, &config.output_dir.join("cache"))?;
    let mut methods = Vec::new();
    for &eps in &config.epsilons {
        let reps = adaptive_replicates(config, &data, eps)?;
        methods.push(summarize("adaptive", eps, &reps, &indices, &mean));
    }
    Ok(Report {
        study: Study::SvStudy.to_string(),
        config: config.clone(),
        indices,
        reference: mean,
        reference_band: Some((min, max)),
        methods,
        variance_trace: variance_trace(config, &data)?,
    })
}

/// Runs the adaptive smoother until the probe marginal is emitted.
fn adaptive_probe(data: &ModelSpec, smoother: &SmootherConfig, probe: &Probe, seed: u64) -> Result<(SmoothedMarginal, Vec<usize>)> {
    let mut driver = AdaptiveLagSmoother::new(data.clone(), smoother, stream(seed))?;
    let last = data.num_observations() - 1;
    let mut active = Vec::new();
    for t in 0..=last {
        let emitted = driver.step(probe, t == last)?;
        active.push(driver.bank().active_len());
        if let Some(m) = emitted.into_iter().find(|m| m.s == probe.index) {
            return Ok((m, active));
        }
    }
    Err(Error::Numerical("probe marginal was never emitted".into()))
}

/// Fixed-lag smoothing over the lag grid against adaptive-lag smoothing over
/// the tolerance grid, at the probe marginal only.
pub fn run_fixed_vs_adaptive(config: &ExperimentConfig) -> Result<Report> {
    config.validate(Study::CompareLags)?;
    let data = simulate_data(config)?;
    let s = config.probe;
    let indices = vec![s];
    let reference = match config.model {
        ModelKind::Lgssm => {
            let smoothed = disturbance_smoother(&config.lgssm_params()?, data.observations())?;
            let m = &smoothed[s];
            vec![gaussian_expectation(&config.objective, m.mean[0], m.cov[(0, 0)])
                .ok_or_else(|| Error::Config(format!("no exact reference for objective '{}'", config.objective)))?]
        }
        ModelKind::Sv => sv_reference(config, &data, Some(s), &config.output_dir.join("cache"))?.mean,
    };
    let probe = Probe { index: s, objective: config.objective.clone() };

    let fixed: Vec<Vec<Replicate>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            let runs = fixed_lag_runs(&data, &config.lags, config.particles, &probe, &mut stream(replicate_seed(config, r)))?;
            let seconds = start.elapsed().as_secs_f64();
            runs.iter().map(|run| Replicate::from_marginals(run, &indices, Vec::new(), seconds)).collect()
        })
        .collect::<Result<_>>()?;
    let mut methods = Vec::new();
    for (k, &delta) in config.lags.iter().enumerate() {
        let reps: Vec<Replicate> = fixed
            .iter()
            .map(|per_lag| {
                let r = &per_lag[k];
                Replicate { estimates: r.estimates.clone(), lags: r.lags.clone(), active_sizes: Vec::new(), seconds: r.seconds }
            })
            .collect();
        methods.push(summarize("fixed", delta as f64, &reps, &indices, &reference));
    }

    for &eps in &config.epsilons {
        let mut smoother = SmootherConfig::new(config.particles, config.precision, eps);
        smoother.skip_idle_draws = true;
        let reps: Vec<Replicate> = (0..config.replicates)
            .into_par_iter()
            .map(|r| {
                let start = Instant::now();
                let (m, active) = adaptive_probe(&data, &smoother, &probe, replicate_seed(config, r))?;
                let seconds = start.elapsed().as_secs_f64();
                Replicate::from_marginals(&[m], &indices, active, seconds)
            })
            .collect::<Result<_>>()?;
        methods.push(summarize("adaptive", eps, &reps, &indices, &reference));
    }
    Ok(Report {
        study: Study::CompareLags.to_string(),
        config: config.clone(),
        indices,
        reference,
        reference_band: None,
        methods,
        variance_trace: variance_trace(config, &data)?,
    })
}

pub fn run_study(study: Study, config: &ExperimentConfig) -> Result<Report> {
    match study {
        Study::LgssmStudy => run_lgssm_experiment(config),
        Study::SvStudy => run_sv_experiment(config),
        Study::CompareLags => run_fixed_vs_adaptive(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kalman::kalman_filter;

    fn small(study: Study) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(study);
        c.horizon = 40;
        c.particles = 60;
        c.replicates = 3;
        c.reference_particles = 80;
        c.reference_replicates = 2;
        c.probe = 25;
        c.lags = vec![1, 4, 64];
        c.output_dir = tempfile::tempdir().unwrap().keep();
        c
    }

    #[test]
    fn immediate_stop_reproduces_filter_gap() {
        let mut c = small(Study::LgssmStudy);
        c.replicates = 1;
        c.epsilons = vec![1e16];
        let report = run_lgssm_experiment(&c).unwrap();
        let params = c.lgssm_params().unwrap();
        let data = simulate_data(&c).unwrap();
        let filt = kalman_filter(&params, data.observations()).unwrap();
        let smooth = disturbance_smoother(&params, data.observations()).unwrap();
        let gap = filt.iter().zip(&smooth).map(|(f, s)| (f.mean[0] - s.mean[0]).powi(2)).sum::<f64>() / 41.0;
        let ideal = report.method("ideal", 1e16).unwrap();
        assert!((ideal.mse - gap).abs() <= 1e-12 * gap.max(1.0));
        assert!(ideal.marginals.iter().all(|m| m.lag_mean == 0.0));
        let adaptive = report.method("adaptive", 1e16).unwrap();
        assert!(adaptive.marginals.iter().all(|m| m.lag_mean == 0.0));
    }

    #[test]
    fn equal_seeds_give_identical_reports() {
        for study in [Study::LgssmStudy, Study::SvStudy, Study::CompareLags] {
            let c = small(study);
            let a = run_study(study, &c).unwrap();
            let b = run_study(study, &c).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn report_shapes() {
        let c = small(Study::LgssmStudy);
        let r = run_lgssm_experiment(&c).unwrap();
        assert_eq!(r.methods.len(), 8);
        assert_eq!(r.variance_trace.len(), 41);
        for m in &r.methods {
            assert_eq!(m.marginals.len(), 41);
            let eff = m.efficiency.unwrap();
            assert!((eff - 1.0 / (m.mse * m.runtime_seconds)).abs() <= 1e-12 * eff);
        }

        let c = small(Study::CompareLags);
        let r = run_fixed_vs_adaptive(&c).unwrap();
        assert_eq!(r.methods.len(), 3 + 5);
        let long = r.method("fixed", 64.0).unwrap();
        assert!(long.marginals[0].lag_mean == 15.0);
        assert!(r.methods.iter().all(|m| m.replicate_estimates.len() == 3));
    }

    #[test]
    fn wrong_model_is_rejected() {
        let mut c = small(Study::LgssmStudy);
        c.model = ModelKind::Sv;
        assert!(run_lgssm_experiment(&c).is_err());
        let mut c = small(Study::SvStudy);
        c.model = ModelKind::Lgssm;
        assert!(run_sv_experiment(&c).is_err());
        let mut c = small(Study::LgssmStudy);
        c.objective = crate::objective::Objective::parse("abs").unwrap();
        assert!(run_lgssm_experiment(&c).is_err());
    }

    #[test]
    fn written_outputs() {
        let c = small(Study::CompareLags);
        let r = run_fixed_vs_adaptive(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        r.write_to(dir.path()).unwrap();
        for f in ["report.json", "estimates.csv", "variance_trace.csv", "timing.json", "probe_estimates.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let est = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
        assert!(est.starts_with("method,param,s,mean,std,lag_mean\nfixed,1,25,"));
        assert!(!std::fs::read_to_string(dir.path().join("report.json")).unwrap().contains("runtime"));
    }
}
