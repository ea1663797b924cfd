//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Algorithm, EnvKind, ExperimentConfig};
use crate::experiment::{reference_ccs, run_experiment, sweep_row};
use crate::output::{
    rebuild_error_curve, runs_root, write_ccs, write_config, write_experiment, write_seed_run,
    write_sweep,
};
use crate::plot::{describe, write_description};
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(
    name = "molsrl",
    version,
    about = "Convex coverage sets by deep optimistic linear support learning"
)]
pub struct Cli {
    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    pub dump_defaults: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the reference CCS of an environment (exact planning on deep sea).
    Plan(PlanArgs),
    /// One DOL run for a single seed.
    Train(TrainArgs),
    /// DOL over several seeds with an averaged error curve.
    Experiment(ExperimentArgs),
    /// Recompute error_curve.csv of an experiment directory from its seed files.
    ErrorCurve(RunDirArgs),
    /// Final error as a function of the episode budget per iteration.
    EpisodesSweep(SweepArgs),
    /// Write a plot description for one or more run directories.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// TOML config; flags below take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "env", value_enum)]
    pub env: Option<EnvKind>,
    #[arg(long = "alg", value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Episodes per solver call.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long = "max-it")]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Output directory; defaults to a name under $MOLSRL_RUNS_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(env) = self.env {
            config.environment = env;
        }
        if let Some(alg) = self.algorithm {
            config.algorithm = alg;
        }
        if let Some(e) = self.episodes {
            config.episodes_per_iteration = Some(e);
        }
        if let Some(m) = self.max_iterations {
            config.max_iterations = m;
        }
        if let Some(t) = self.tau {
            config.tau = t;
        }
        if let Some(s) = self.master_seed {
            config.master_seed = s;
        }
        Ok(config)
    }

    fn out_dir(&self, default_name: String) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| runs_root().join(default_name))
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub common: Overrides,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Run seeds 0..N instead of the configured list.
    #[arg(long)]
    pub seeds: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Episode budgets per iteration.
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000, 4000])]
    pub budgets: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct RunDirArgs {
    #[arg(long)]
    pub run: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Run directories; each contributes one series per figure.
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    /// Defaults to plot.json in the first run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut config = args.common.resolve()?;
    if let Some(n) = args.seeds {
        config.seeds = (0..n).collect();
    }
    config.validate()?;
    Ok(config)
}

fn plan(args: &PlanArgs) -> Result<String, HarnessError> {
    let config = args.common.resolve()?;
    config.validate()?;
    let dir = args
        .common
        .out_dir(format!("plan-{}", config.environment.name()));
    let truth = reference_ccs(&config)?;
    write_config(&dir, &config)?;
    write_ccs(&dir.join("ccs.csv"), &truth, "exact")?;
    Ok(format!(
        "{} vectors in {}",
        truth.len(),
        dir.join("ccs.csv").display()
    ))
}

fn train(args: &TrainArgs) -> Result<String, HarnessError> {
    let mut config = args.common.resolve()?;
    config.seeds = vec![args.seed];
    config.validate()?;
    let dir = args.common.out_dir(format!(
        "train-{}-{}-seed{}",
        config.environment.name(),
        config.algorithm.name(),
        args.seed
    ));
    let truth = reference_ccs(&config)?;
    let result = run_experiment(&config, &truth)?;
    let run = &result.runs[0];
    write_config(&dir, &config)?;
    write_ccs(&dir.join("reference_ccs.csv"), &truth, "exact")?;
    write_seed_run(&dir, run)?;
    Ok(format!(
        "|S| = {} after {} iterations, max CCS error {} ({})",
        run.ccs.len(),
        run.rows.len(),
        run.final_error(),
        dir.display()
    ))
}

fn experiment(args: &ExperimentArgs) -> Result<String, HarnessError> {
    let config = experiment_config(args)?;
    let dir = args.common.out_dir(format!(
        "experiment-{}-{}",
        config.environment.name(),
        config.algorithm.name()
    ));
    let truth = reference_ccs(&config)?;
    let result = run_experiment(&config, &truth)?;
    write_experiment(&dir, &config, &result)?;
    Ok(format!(
        "mean final max CCS error {} over {} seeds ({})",
        result.mean_final_error(),
        result.runs.len(),
        dir.display()
    ))
}

fn episodes_sweep(args: &SweepArgs) -> Result<String, HarnessError> {
    let config = experiment_config(&args.experiment)?;
    if args.budgets.is_empty() || args.budgets.contains(&0) {
        return Err(HarnessError::Config("budgets must be positive".into()));
    }
    let dir = args.experiment.common.out_dir(format!(
        "sweep-{}-{}",
        config.environment.name(),
        config.algorithm.name()
    ));
    let truth = reference_ccs(&config)?;
    let mut rows = Vec::with_capacity(args.budgets.len());
    for &budget in &args.budgets {
        let budget_config = ExperimentConfig {
            episodes_per_iteration: Some(budget),
            ..config.clone()
        };
        let result = run_experiment(&budget_config, &truth)?;
        write_experiment(
            &dir.join(format!("episodes-{budget}")),
            &budget_config,
            &result,
        )?;
        rows.push(sweep_row(budget, &result));
    }
    write_config(&dir, &config)?;
    write_sweep(&dir.join("sweep.csv"), &rows)?;
    let summary: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: {}", r.episodes, r.mean))
        .collect();
    Ok(format!("{} ({})", summary.join(", "), dir.display()))
}

fn plot(args: &PlotArgs) -> Result<String, HarnessError> {
    let description = describe(&args.runs)?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| args.runs[0].join("plot.json"));
    write_description(&path, &description)?;
    Ok(path.display().to_string())
}

fn error_curve(args: &RunDirArgs) -> Result<String, HarnessError> {
    let curve = rebuild_error_curve(&args.run)?;
    Ok(format!(
        "{} iterations in {}",
        curve.len(),
        Path::new(&args.run).join("error_curve.csv").display()
    ))
}

/// Runs the parsed command and returns a one-line summary.
pub fn run(cli: &Cli) -> Result<String, HarnessError> {
    if cli.dump_defaults {
        return Ok(ExperimentConfig::dump_defaults());
    }
    match &cli.command {
        None => Err(HarnessError::Config("no command given; see --help".into())),
        Some(Command::Plan(a)) => plan(a),
        Some(Command::Train(a)) => train(a),
        Some(Command::Experiment(a)) => experiment(a),
        Some(Command::ErrorCurve(a)) => error_curve(a),
        Some(Command::EpisodesSweep(a)) => episodes_sweep(a),
        Some(Command::Plot(a)) => plot(a),
    }
}
