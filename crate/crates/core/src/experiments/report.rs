use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::model::format_value;

/// 1 / (MSE · runtime).
pub fn efficiency(mse: f64, runtime_seconds: f64) -> Result<f64> {
    if !(mse > 0.0 && mse.is_finite()) || !(runtime_seconds > 0.0 && runtime_seconds.is_finite()) {
        return Err(Error::invalid(format!(
            "efficiency needs positive MSE and runtime, got {mse} and {runtime_seconds}"
        )));
    }
    Ok(1.0 / (mse * runtime_seconds))
}

/// Across-replicate summary of one marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub s: usize,
    pub mean: f64,
    pub std: f64,
    pub lag_mean: f64,
}

/// Results for one method at one tolerance or lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    /// `adaptive`, `ideal` or `fixed`.
    pub method: String,
    /// Tolerance ε or lag Δ.
    pub param: f64,
    /// Mean over marginals and replicates of (estimate − reference)².
    pub mse: f64,
    /// Mean over marginals of (replicate mean − reference).
    pub bias: f64,
    pub max_active: usize,
    /// |S_t| at every t in the first replicate.
    pub active_trace: Vec<usize>,
    pub marginals: Vec<MarginalSummary>,
    /// Per-replicate estimates when a single marginal is studied.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replicate_estimates: Vec<f64>,
    /// Mean wall-clock seconds of one smoothing run.
    #[serde(skip)]
    pub runtime_seconds: f64,
    #[serde(skip)]
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub study: String,
    pub config: ExperimentConfig,
    /// Marginals covered, in the order of `reference`.
    pub indices: Vec<usize>,
    pub reference: Vec<f64>,
    /// Replicate range of a Monte Carlo reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_band: Option<(Vec<f64>, Vec<f64>)>,
    pub methods: Vec<MethodReport>,
    /// Criterion of the marginal s = 0 at t = 0, 1, ….
    pub variance_trace: Vec<f64>,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    method: &'a str,
    param: f64,
    mse: f64,
    runtime_seconds: f64,
    efficiency: Option<f64>,
}

impl Report {
    pub fn method(&self, method: &str, param: f64) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method && m.param == param)
    }

    /// Writes `report.json`, `estimates.csv`, `variance_trace.csv`,
    /// `timing.json` and, for single-marginal studies, `probe_estimates.csv`.
    /// Everything except `timing.json` is a deterministic function of the
    /// configuration.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;

        let mut est = Vec::new();
        writeln!(est, "method,param,s,mean,std,lag_mean")?;
        for m in &self.methods {
            for row in &m.marginals {
                writeln!(
                    est,
                    "{},{},{},{},{},{}",
                    m.method,
                    m.param,
                    row.s,
                    format_value(row.mean),
                    format_value(row.std),
                    format_value(row.lag_mean)
                )?;
            }
        }
        fs::write(dir.join("estimates.csv"), est)?;

        let mut trace = Vec::new();
        writeln!(trace, "t,criterion")?;
        for (t, v) in self.variance_trace.iter().enumerate() {
            writeln!(trace, "{t},{}", format_value(*v))?;
        }
        fs::write(dir.join("variance_trace.csv"), trace)?;

        if self.methods.iter().any(|m| !m.replicate_estimates.is_empty()) {
            let mut probe = Vec::new();
            writeln!(probe, "method,param,replicate,estimate")?;
            for m in &self.methods {
                for (r, v) in m.replicate_estimates.iter().enumerate() {
                    writeln!(probe, "{},{},{r},{}", m.method, m.param, format_value(*v))?;
                }
            }
            fs::write(dir.join("probe_estimates.csv"), probe)?;
        }

        let timing: Vec<TimingRow> = self
            .methods
            .iter()
            .map(|m| TimingRow {
                method: &m.method,
                param: m.param,
                mse: m.mse,
                runtime_seconds: m.runtime_seconds,
                efficiency: m.efficiency,
            })
            .collect();
        let mut json = serde_json::to_string_pretty(&timing)?;
        json.push('\n');
        fs::write(dir.join("timing.json"), json)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_examples() {
        assert_eq!(efficiency(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(efficiency(0.5, 2.0).unwrap(), 1.0);
        assert_eq!(efficiency(0.3, 4.0).unwrap(), efficiency(0.3, 2.0).unwrap() / 2.0);
        for (m, r) in [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, f64::NAN)] {
            assert!(efficiency(m, r).is_err());
        }
    }
}
