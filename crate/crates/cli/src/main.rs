use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use adalag::experiments::{run_study, ExperimentConfig, Report, Study};
use adalag::model::{simulate, ObservationRows};
use adalag::particle::OriginTracker;
use adalag::rng::stream;
use adalag::smoothers::{AdaptiveLagSmoother, SmootherConfig};
use adalag::SmoothedMarginal;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

/// Online marginal smoothing with adaptive lags.
///
/// Model and run settings come from a preset, optionally overlaid by a TOML
/// file (`--config`) and by trailing `--key=value` overrides.
#[derive(Parser)]
#[command(name = "adalag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV (`t,x_0,…,y_0,…`).
    Simulate {
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Run one adaptive-lag smoother over a CSV observation stream and print
    /// each marginal as it is finalised.
    Smooth {
        /// Observation CSV with a header; `y_*` columns are used when present.
        /// Reads stdin when omitted or `-`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Stopping tolerance ε.
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        /// Abort when more marginals than this are active at once.
        #[arg(long)]
        max_active: Option<usize>,
        /// Write `t,ess,unique_ancestors_at_0` per step to this file.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Adaptive-lag MSE, cost and lags on the linear Gaussian model.
    LgssmStudy(Settings),
    /// Adaptive-lag estimates on stochastic volatility against a long-run reference.
    SvStudy(Settings),
    /// Fixed-lag versus adaptive-lag estimates of a single marginal.
    CompareLags(Settings),
}

#[derive(Args)]
struct Settings {
    /// TOML file of configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key=value` overrides, applied after the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

impl Settings {
    fn load(&self, study: Study) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig::load(study, self.config.as_deref(), &self.overrides)?)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { output, settings } => cmd_simulate(&settings.load(Study::LgssmStudy)?, output.as_deref()),
        Command::Smooth { input, epsilon, max_active, diagnostics, settings } => {
            let config = settings.load(Study::LgssmStudy)?;
            cmd_smooth(&config, input.as_deref(), epsilon, max_active, diagnostics.as_deref())
        }
        Command::LgssmStudy(s) => cmd_study(Study::LgssmStudy, &s.load(Study::LgssmStudy)?),
        Command::SvStudy(s) => cmd_study(Study::SvStudy, &s.load(Study::SvStudy)?),
        Command::CompareLags(s) => cmd_study(Study::CompareLags, &s.load(Study::CompareLags)?),
    }
}

fn cmd_simulate(config: &ExperimentConfig, output: Option<&Path>) -> Result<()> {
    let model = config.build_model()?;
    let trajectory = simulate(&model, config.horizon, config.data_seed);
    match output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            trajectory.write_csv(BufWriter::new(file))?;
        }
        None => trajectory.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_smooth(
    config: &ExperimentConfig,
    input: Option<&Path>,
    epsilon: f64,
    max_active: Option<usize>,
    diagnostics: Option<&Path>,
) -> Result<()> {
    let reader: Box<dyn BufRead> = match input {
        Some(p) if p != Path::new("-") => {
            Box::new(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))
        }
        _ => Box::new(io::stdin().lock()),
    };
    let rows = ObservationRows::new(reader)?;
    let model = config.build_model()?;
    if rows.width() != model.obs_dim() {
        bail!("observation file has {} columns, the model expects {}", rows.width(), model.obs_dim());
    }
    if config.precision == 1 {
        eprintln!("warning: precision K = 1 makes the backward-sampled statistics degenerate; K >= 2 is recommended");
    }

    let mut smoother_config = SmootherConfig::new(config.particles, config.precision, epsilon);
    smoother_config.max_active = max_active;
    let mut smoother = AdaptiveLagSmoother::new(model, &smoother_config, stream(config.seed))?;
    let mut diag = match diagnostics {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            writeln!(w, "t,ess,unique_ancestors_at_0")?;
            Some((w, OriginTracker::default()))
        }
        None => None,
    };

    let mut out = io::stdout().lock();
    writeln!(out, "{}", SmoothedMarginal::CSV_HEADER)?;
    for row in rows {
        smoother.push_observation(&row?)?;
        while smoother.has_pending() {
            for m in smoother.step(&config.objective, false)? {
                writeln!(out, "{}", m.csv_record())?;
            }
            if let (Some((w, tracker)), Some(sample)) = (diag.as_mut(), smoother.current()) {
                tracker.observe(sample);
                writeln!(w, "{},{},{}", sample.t(), adalag::model::format_value(sample.ess()), tracker.unique_origins())?;
            }
        }
        out.flush()?;
    }
    for m in smoother.finish() {
        writeln!(out, "{}", m.csv_record())?;
    }
    out.flush()?;
    if let Some((mut w, _)) = diag {
        w.flush()?;
    }
    Ok(())
}

fn cmd_study(study: Study, config: &ExperimentConfig) -> Result<()> {
    let report = run_study(study, config)?;
    report.write_to(&config.output_dir)?;
    print_summary(&report);
    eprintln!("wrote {}", config.output_dir.display());
    Ok(())
}

fn print_summary(report: &Report) {
    println!("{:<9} {:>10} {:>12} {:>12} {:>10} {:>12} {:>10}", "method", "param", "mse", "bias", "max|S|", "runtime_s", "efficiency");
    for m in &report.methods {
        let eff = m.efficiency.map_or_else(|| "-".to_string(), |e| format!("{e:.4e}"));
        println!(
            "{:<9} {:>10} {:>12.4e} {:>12.4e} {:>10} {:>12.4e} {:>10}",
            m.method, m.param, m.mse, m.bias, m.max_active, m.runtime_seconds, eff
        );
    }
}
