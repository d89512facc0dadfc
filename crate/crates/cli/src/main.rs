use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dynclass_core::experiments::{
    build_systems, emit_trajectory_cloud, run_experiment, sweep, sweep_csv, training_set,
    ClassifierKind, ExperimentConfig, SweepAxis,
};
use dynclass_core::margin::{beta_with_convergence, margin_chain_report, risk_bound, RiskBoundInput};
use dynclass_core::Error;

#[derive(Parser)]
#[command(name = "dynclass", version, about = "Classify trajectories of two linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and validate one configuration over several seeds.
    Run(Common),
    /// Vary one parameter and tabulate the validation error.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary: N, L or Ts.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 2,5,10,50,100.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Write normalized trajectories of each system for plotting.
    Cloud {
        #[command(flatten)]
        common: Common,
        /// Trajectories per system.
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Margin chain, beta and the risk bound for one training set.
    MarginReport {
        #[command(flatten)]
        common: Common,
        /// Confidence parameter of the risk bound.
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        /// Constant of the risk bound.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// model-based, svm-hard or svm-soft.
    #[arg(long)]
    classifier: Option<String>,
    /// Classify raw rather than unit-norm trajectories.
    #[arg(long)]
    no_normalize: bool,
    /// Slack penalty for svm-soft.
    #[arg(long = "soft-C")]
    soft_c: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(name) = &self.classifier {
            cfg.classifier = name.parse::<ClassifierKind>()?;
        }
        if self.no_normalize {
            cfg.normalize = false;
        }
        if let Some(c) = self.soft_c {
            cfg.soft_c = Some(c);
        }
        cfg.validate()?;
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(cfg)
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            let report = run_experiment(&cfg)?;
            write(&common.out, "report.json", &report.to_json()?)?;
            println!(
                "R_test = {:.4} ± {:.4} over {} seeds",
                report.r_test_mean,
                report.r_test_std,
                report.runs.len()
            );
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.config()?;
            let axis: SweepAxis = axis.parse()?;
            let rows = sweep(&cfg, axis, &values);
            write(&common.out, "results.csv", &sweep_csv(&rows))?;
            write(&common.out, "report.json", &serde_json::to_string_pretty(&rows)?)?;
            for row in &rows {
                match (&row.report, &row.error) {
                    (Some(r), _) => println!("{} {}: R_test = {:.4} ± {:.4}", axis_name(axis), row.axis_value, r.r_test_mean, r.r_test_std),
                    (None, Some(e)) => println!("{} {}: error: {e}", axis_name(axis), row.axis_value),
                    (None, None) => {}
                }
            }
        }
        Command::Cloud { common, count } => {
            let cfg = common.config()?;
            let (c1, c2) = emit_trajectory_cloud(&cfg, count)?;
            write(&common.out, "cloud_class1.csv", &c1.to_csv())?;
            write(&common.out, "cloud_class2.csv", &c2.to_csv())?;
        }
        Command::MarginReport { common, eta, c } => {
            let cfg = common.config()?;
            let (sys1, sys2) = build_systems(&cfg)?;
            let data = training_set(&sys1, &sys2, &cfg, cfg.seed)?;
            let margin = margin_chain_report(&sys1, &sys2, cfg.horizon, &data)?;
            let infinite = beta_with_convergence(&sys1, &sys2, 500)?;
            let input = RiskBoundInput {
                l: data.len(),
                rho: margin.rho_d,
                r: 1.0,
                eta,
                c,
            };
            let bound = risk_bound(&input)?;
            let doc = serde_json::json!({
                "config": cfg,
                "margin": margin,
                "beta_large_N": infinite,
                "risk_bound": {
                    "value": bound,
                    "input": input,
                    "note": "up to the constant c; natural logarithm",
                },
            });
            write(&common.out, "report.json", &serde_json::to_string_pretty(&doc)?)?;
            println!(
                "beta = {:.3e}, bound = {:.3e} <= rho_M = {:.3e} <= rho_D = {:.3e}",
                margin.beta, margin.bound, margin.rho_m, margin.rho_d
            );
        }
    }
    Ok(())
}

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::N => "N",
        SweepAxis::L => "L",
        SweepAxis::Ts => "Ts",
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for infeasible horizons.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Infeasible { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
