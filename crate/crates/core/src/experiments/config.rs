use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_lgssm, make_sv, LgssmParams, ModelSpec, SvParams};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lgssm,
    Sv,
}

/// The three replicated studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    LgssmStudy,
    SvStudy,
    CompareLags,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::LgssmStudy => "lgssm-study",
            Study::SvStudy => "sv-study",
            Study::CompareLags => "compare-lags",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lgssm-study" => Ok(Study::LgssmStudy),
            "sv-study" => Ok(Study::SvStudy),
            "compare-lags" => Ok(Study::CompareLags),
            other => Err(Error::Config(format!("unknown study '{other}'"))),
        }
    }
}

/// Settings of a replicated study.
///
/// Stored as a flat key-value table; see [`ExperimentConfig::load`] for the
/// layering of presets, files and overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub a: f64,
    pub b: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub phi: f64,
    pub sigma: f64,
    pub beta: f64,
    /// Last time index T; the data hold T + 1 observations.
    pub horizon: usize,
    pub epsilons: Vec<f64>,
    pub lags: Vec<usize>,
    pub particles: usize,
    pub precision: usize,
    pub replicates: usize,
    pub seed: u64,
    pub data_seed: u64,
    pub objective: Objective,
    /// Marginal examined by the lag comparison.
    pub probe: usize,
    pub reference_particles: usize,
    pub reference_replicates: usize,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Study::LgssmStudy)
    }
}

impl ExperimentConfig {
    pub fn preset(study: Study) -> Self {
        let base = Self {
            model: ModelKind::Lgssm,
            a: 0.95,
            b: 0.5,
            sigma_u: 0.5,
            sigma_v: 2.0,
            phi: 0.98,
            sigma: 0.1_f64.sqrt(),
            beta: 0.7_f64.sqrt(),
            horizon: 200,
            epsilons: vec![0.5, 0.2, 0.1, 1e-3],
            lags: vec![1, 2, 4, 8, 16, 32, 64, 128],
            particles: 400,
            precision: 2,
            replicates: 100,
            seed: 1,
            data_seed: 2,
            objective: Objective::Identity,
            probe: 750,
            reference_particles: 2000,
            reference_replicates: 10,
            output_dir: PathBuf::from("results"),
        };
        match study {
            Study::LgssmStudy => base,
            Study::SvStudy => Self { model: ModelKind::Sv, epsilons: vec![0.5, 0.1, 1e-3], replicates: 200, ..base },
            Study::CompareLags => Self {
                horizon: 1000,
                epsilons: vec![0.5, 0.2, 0.1, 1e-3, 1e-6],
                replicates: 200,
                objective: Objective::Square,
                ..base
            },
        }
    }

    /// Preset for `study`, overlaid with the keys of `file` (if any), then
    /// with `overrides` of the form `key=value`. Values are read as TOML
    /// (`0.5`, `[1, 2]`, `"sv"`); anything that does not parse is taken as a
    /// bare string.
    pub fn load(study: Study, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match toml::Value::try_from(Self::preset(study)) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("configs serialise to tables"),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            let from_file: toml::Table =
                text.parse().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            table.extend(from_file);
        }
        for item in overrides {
            let (key, value) = parse_override(item)?;
            table.insert(key, value);
        }
        let output_dir = table.remove("output_dir");
        let mut config: Self =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(dir) = output_dir {
            config.output_dir = match dir {
                toml::Value::String(s) => PathBuf::from(s),
                other => return Err(Error::Config(format!("output_dir must be a string, got {other}"))),
            };
        }
        config.validate(study)?;
        Ok(config)
    }

    pub fn validate(&self, study: Study) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.replicates == 0 {
            return fail("replicates must be at least 1".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.particles == 0 || self.precision == 0 {
            return fail("particles and precision must be positive".into());
        }
        if self.reference_particles == 0 || self.reference_replicates == 0 {
            return fail("reference_particles and reference_replicates must be positive".into());
        }
        if self.epsilons.is_empty() {
            return fail("the tolerance grid is empty".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return fail(format!("tolerances must be finite and non-negative, got {e}"));
        }
        if study == Study::CompareLags {
            if self.lags.is_empty() {
                return fail("the lag grid is empty".into());
            }
            if self.lags.contains(&0) {
                return fail("lags must be at least 1".into());
            }
            if self.probe > self.horizon {
                return fail(format!("probe {} lies beyond the horizon {}", self.probe, self.horizon));
            }
        }
        match self.model {
            ModelKind::Lgssm => self.lgssm_params().map(|_| ()),
            ModelKind::Sv => make_sv(self.sv_params()).map(|_| ()),
        }
    }

    pub fn lgssm_params(&self) -> Result<LgssmParams> {
        if !(self.a.abs() < 1.0) {
            return Err(Error::Config(format!("|a| must be < 1 for the stationary initial law, got {}", self.a)));
        }
        let params = LgssmParams::scalar(self.a, self.b, self.sigma_u, self.sigma_v);
        make_lgssm(params.clone())?;
        Ok(params)
    }

    pub fn sv_params(&self) -> SvParams {
        SvParams { phi: self.phi, sigma: self.sigma, beta: self.beta }
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        match self.model {
            ModelKind::Lgssm => make_lgssm(self.lgssm_params()?),
            ModelKind::Sv => make_sv(self.sv_params()),
        }
    }
}

fn parse_override(item: &str) -> Result<(String, toml::Value)> {
    let item = item.strip_prefix("--").unwrap_or(item);
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{item}' is not of the form key=value")))?;
    let key = key.trim().replace('-', "_");
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn presets_are_valid() {
        for study in [Study::LgssmStudy, Study::SvStudy, Study::CompareLags] {
            ExperimentConfig::preset(study).validate(study).unwrap();
        }
        let c = ExperimentConfig::preset(Study::CompareLags);
        assert_eq!((c.horizon, c.probe, c.replicates), (1000, 750, 200));
        assert_eq!(c.epsilons, vec![0.5, 0.2, 0.1, 1e-3, 1e-6]);
    }

    #[test]
    fn file_and_overrides_layer_on_preset() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "horizon = 50\nreplicates = 3\nepsilons = [0.5, 1]\noutput_dir = \"out\"").unwrap();
        let overrides = vec![
            "--replicates=7".to_string(),
            "objective=square".to_string(),
            "--model=sv".to_string(),
            "--lags=[3, 5]".to_string(),
            "--epsilons=[1e-3]".to_string(),
        ];
        let c = ExperimentConfig::load(Study::LgssmStudy, Some(file.path()), &overrides).unwrap();
        assert_eq!(c.horizon, 50);
        assert_eq!(c.replicates, 7);
        assert_eq!(c.objective, Objective::Square);
        assert_eq!(c.model, ModelKind::Sv);
        assert_eq!(c.lags, vec![3, 5]);
        assert_eq!(c.epsilons, vec![1e-3]);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn integer_tolerances_are_accepted() {
        let c = ExperimentConfig::load(Study::LgssmStudy, None, &["epsilons=[1, 0.5]".into()]).unwrap();
        assert_eq!(c.epsilons, vec![1.0, 0.5]);
        let c = ExperimentConfig::load(Study::LgssmStudy, None, &["a=0".into()]).unwrap();
        assert_eq!(c.a, 0.0);
    }

    #[test]
    fn violations_are_rejected() {
        for bad in ["replicates=0", "horizon=0", "epsilons=[]", "epsilons=[-1]", "unknown=1", "objective=nope", "a=1"]
        {
            assert!(ExperimentConfig::load(Study::LgssmStudy, None, &[bad.into()]).is_err(), "{bad}");
        }
        assert!(ExperimentConfig::load(Study::CompareLags, None, &["lags=[0, 1]".into()]).is_err());
        assert!(ExperimentConfig::load(Study::CompareLags, None, &["probe=2000".into()]).is_err());
        assert!(ExperimentConfig::load(Study::SvStudy, None, &["phi=1".into()]).is_err());
        assert!(ExperimentConfig::load(Study::LgssmStudy, None, &["nokey".into()]).is_err());
    }
}
